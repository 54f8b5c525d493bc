"""Exception hierarchy shared by all modules."""


class RauzyError(Exception):
    """Base class for every error raised by this package."""


class OutOfRange(RauzyError, ValueError):
    """Parameters (a, b) outside the supported cubic family."""


class PrecisionExhausted(RauzyError, ArithmeticError):
    """A certified comparison stayed ambiguous at the maximum precision."""


class IndexBelowMinusFour(RauzyError, IndexError):
    """The recurrent sequence is only defined for indices n >= -4."""


class InadmissibleDigits(RauzyError, ValueError):
    """A digit string violates the lexicographic admissibility condition."""


class DegenerateMap(RauzyError, ArithmeticError):
    """The conjugation map could not be certified as invertible."""


class VerificationFailed(RauzyError):
    """The theorem verifier found anomalies; ``report`` carries them."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"{len(report.anomalies)} anomalies")
