"""Exception types shared across the package."""


class NCProbError(Exception):
    """Base class for all package errors."""


class AlphabetMismatch(NCProbError, ValueError):
    """Operands live over different generator alphabets."""


class Unsupported(NCProbError, NotImplementedError):
    """Operation is not defined for the given alphabet kind or model."""


class ZeroElement(NCProbError, ValueError):
    """Operation needs a non-zero element."""


class TruncationError(NCProbError, ValueError):
    """A functional was queried beyond its stored degree."""


class NotNormalized(NCProbError, ValueError):
    pass


class NotCentralized(NCProbError, ValueError):
    pass


class OffGridError(NCProbError, ValueError):
    """A time argument does not lie on the bin grid."""


class CutoffError(NCProbError, ValueError):
    """Fock-space cutoff is too small for an exact computation."""
