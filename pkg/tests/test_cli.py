"""CLI contract: subcommands, exit codes, degraded mode, worker determinism."""

import json

import pytest

from tlslayers import synth
from tlslayers.cli import main
from tlslayers.documents import parse_document


SCENARIO_YAML = """\
defaults:
  group: x25519
  response_body_bytes: 4096
connections:
  - boundary_times_ns: [0, 360000, 654000, 6201000, 6727000, 15798000]
    segmentation_seed: 1
  - boundary_times_ns: [1000000000, 1000390000, 1002256000, 1008135000, 1009126000, 1018006000]
    segmentation_seed: 2
  - boundary_times_ns: [2000000000, 2000390000, 2002256000, 2008135000, 2009126000, 2018006000]
    segmentation_seed: 3
    anomalies: [drop_keylog]
"""


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    scenario = out / "scenario.yaml"
    scenario.write_text(SCENARIO_YAML)
    code = main(["synth", "--spec", str(scenario), "--out", str(out)])
    assert code == 0
    return out


def test_synth_writes_expected_files(fixture_dir):
    assert (fixture_dir / "capture.pcap").exists()
    assert (fixture_dir / "keylog.txt").exists()
    truth = json.loads((fixture_dir / "ground_truth.json").read_text())
    assert truth["tallies"]["total_streams"] == 3


def test_analyze_writes_document_and_exits_zero(fixture_dir, tmp_path, capsys):
    out = tmp_path / "run.json"
    code = main([
        "analyze",
        "--pcap", str(fixture_dir / "capture.pcap"),
        "--keylog", str(fixture_dir / "keylog.txt"),
        "--label", "demo",
        "--out", str(out),
    ])
    assert code == 0
    doc = parse_document(out.read_text())
    assert doc["label"] == "demo"
    assert doc["counts"] == {
        "total_streams": 3, "valid": 2, "partial": {"no_keys": 1}, "excluded": {},
    }
    assert capsys.readouterr().out  # console summary printed


def test_analyze_worker_count_does_not_change_output(fixture_dir, tmp_path):
    outputs = []
    for workers in (1, 2, 8):
        out = tmp_path / f"run-{workers}.json"
        code = main([
            "analyze",
            "--pcap", str(fixture_dir / "capture.pcap"),
            "--keylog", str(fixture_dir / "keylog.txt"),
            "--label", "demo",
            "--workers", str(workers),
            "--out", str(out),
        ])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_analyze_without_keylog_is_degraded_but_ok(fixture_dir, tmp_path, capsys):
    out = tmp_path / "nodecrypt.json"
    code = main([
        "analyze",
        "--pcap", str(fixture_dir / "capture.pcap"),
        "--label", "nodecrypt",
        "--out", str(out),
    ])
    assert code == 0
    doc = parse_document(out.read_text())
    assert doc["decrypted"] is False
    assert set(doc["layers"]) == {"tcp_handshake", "tcp_to_tls"}
    assert doc["e2e"] is None
    assert doc["counts"]["valid"] == 0


def test_analyze_unreadable_input_exits_2(tmp_path):
    assert main(["analyze", "--pcap", str(tmp_path / "missing.pcap")]) == 2
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"\x00" * 64)
    assert main(["analyze", "--pcap", str(bad)]) == 2


def test_analyze_zero_usable_streams_exits_3(tmp_path):
    import struct

    path = tmp_path / "nontcp.pcap"
    with path.open("wb") as fh:
        fh.write(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
        arp = b"\xff" * 6 + b"\x02" * 6 + b"\x08\x06" + bytes(28)
        fh.write(struct.pack("<IIII", 1, 0, len(arp), len(arp)))
        fh.write(arp)
    assert main(["analyze", "--pcap", str(path)]) == 3


def test_compare_self_and_output(fixture_dir, tmp_path, capsys):
    run = tmp_path / "run.json"
    assert main([
        "analyze",
        "--pcap", str(fixture_dir / "capture.pcap"),
        "--keylog", str(fixture_dir / "keylog.txt"),
        "--label", "self",
        "--out", str(run),
    ]) == 0
    capsys.readouterr()
    comp_path = tmp_path / "comp.json"
    code = main([
        "compare",
        "--baseline", str(run),
        "--candidate", str(run),
        "--percentiles", "p50,p95,p99",
        "--out", str(comp_path),
        "--format", "json",
    ])
    assert code == 0
    doc = parse_document(comp_path.read_text())
    assert doc["percentiles"] == ["p50", "p95", "p99"]
    for rep in doc["reports"].values():
        assert rep["of_combined"] == 1.0
        assert rep["cos_percent"] == 0.0


def test_compare_incompatible_exits_5(fixture_dir, tmp_path, capsys):
    full = tmp_path / "full.json"
    nodecrypt = tmp_path / "nodec.json"
    main(["analyze", "--pcap", str(fixture_dir / "capture.pcap"),
          "--keylog", str(fixture_dir / "keylog.txt"), "--out", str(full)])
    main(["analyze", "--pcap", str(fixture_dir / "capture.pcap"), "--out", str(nodecrypt)])
    capsys.readouterr()
    assert main(["compare", "--baseline", str(nodecrypt), "--candidate", str(full)]) == 5


def test_compare_unreadable_exits_2(tmp_path):
    assert main(["compare", "--baseline", "/no/a.json", "--candidate", "/no/b.json"]) == 2
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    assert main(["compare", "--baseline", str(garbage), "--candidate", str(garbage)]) == 2


def test_synth_bad_spec_exits_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("connections:\n  - boundary_times_ns: [5, 4, 3, 2, 1, 0]\n")
    assert main(["synth", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_internal_invariant_violation_exits_4(fixture_dir, monkeypatch, capsys):
    import tlslayers.cli as cli_mod

    def boom(*args, **kwargs):
        raise AssertionError("stream tallies do not sum to total")

    monkeypatch.setattr(cli_mod, "analyze_capture", boom)
    code = main(["analyze", "--pcap", str(fixture_dir / "capture.pcap")])
    assert code == 4
    assert "internal error" in capsys.readouterr().err


def test_csv_and_table_formats(fixture_dir, tmp_path, capsys):
    run = tmp_path / "run.json"
    main(["analyze", "--pcap", str(fixture_dir / "capture.pcap"),
          "--keylog", str(fixture_dir / "keylog.txt"), "--out", str(run), "--format", "csv"])
    out = capsys.readouterr().out
    assert out.startswith("layer,statistic,value")
    main(["analyze", "--pcap", str(fixture_dir / "capture.pcap"),
          "--keylog", str(fixture_dir / "keylog.txt"), "--format", "table"])
    out = capsys.readouterr().out
    assert "TCP handshake" in out
