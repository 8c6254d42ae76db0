"""Exception types shared across the pipeline.

Most of these mark a single connection as partial/excluded and are caught by
the pipeline; only the capture-level ones normally reach the CLI.
"""


class TlsLayersError(Exception):
    """Base class for all toolkit errors."""


# -- capture ingest ----------------------------------------------------------

class UnreadableFile(TlsLayersError):
    pass


class UnknownMagic(TlsLayersError):
    pass


class UnknownLinkType(TlsLayersError):
    pass


class MalformedHeader(TlsLayersError):
    pass


# -- TLS wire formats --------------------------------------------------------

class BadRecordHeader(TlsLayersError):
    pass


class OversizeRecord(TlsLayersError):
    pass


class MalformedHello(TlsLayersError):
    pass


class UnsupportedCipherSuite(TlsLayersError):
    pass


class UnknownGroup(TlsLayersError):
    pass


# -- key schedule / decryption -----------------------------------------------

class LengthMismatch(TlsLayersError):
    pass


class AuthFailure(TlsLayersError):
    pass


class EmptyInnerPlaintext(TlsLayersError):
    pass


class FinishedNotFound(TlsLayersError):
    pass


# -- reassembly / timeline ---------------------------------------------------

class GapAtOffset(TlsLayersError):
    pass


class NoRequestFound(TlsLayersError):
    pass


class NoResponseFound(TlsLayersError):
    pass


class InvalidTimeline(TlsLayersError):
    pass


# -- statistics / metrics ----------------------------------------------------

class EmptySamples(TlsLayersError):
    pass


class ZeroBaseline(TlsLayersError):
    pass


class ZeroBaselineSD(TlsLayersError):
    pass


class ZeroDenominator(TlsLayersError):
    pass


# -- synthetic generator -----------------------------------------------------

class InvalidSpec(TlsLayersError):
    pass


class WriteFailure(TlsLayersError):
    pass
