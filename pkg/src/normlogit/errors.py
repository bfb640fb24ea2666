"""Exception hierarchy shared by all normlogit modules."""


class NormLogitError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(NormLogitError, ValueError):
    """Inputs violate a documented precondition (e.g. dimension mismatch)."""


class NonFiniteProbability(NormLogitError, ArithmeticError):
    """Naive-mode softmax produced inf/nan.

    Attributes
    ----------
    utility : float
        The utility value whose exponentiation (or whose probability) was not
        representable in double precision.
    """

    def __init__(self, utility, message=None):
        self.utility = float(utility)
        if message is None:
            message = f"exp({self.utility!r}) is not representable as a finite double"
        super().__init__(message)


class NonFiniteLikelihood(NormLogitError, ArithmeticError):
    """The optimizer hit a non-finite log-likelihood and gave up.

    Carries the iteration count and the parameter vector at which the
    failure occurred so callers can report how far the run got.
    """

    def __init__(self, message, iteration=0, beta=None, utility=None):
        super().__init__(message)
        self.iteration = iteration
        self.beta = beta
        self.utility = utility


class RankDeficient(NormLogitError):
    """Stacked covariate columns are not linearly independent."""


class SingularInformation(NormLogitError, ArithmeticError):
    """Observed information at the estimate cannot be inverted."""


class ZeroNormalizer(NormLogitError, ValueError):
    """A normalizing vector contains a zero entry."""


class ZeroColumn(ZeroNormalizer):
    """varmax of an all-zero column would be a zero normalizer."""


class ImplicitIntercept(NormLogitError, ValueError):
    """Centered scaling was requested on a dataset without an explicit intercept."""


class EmptySample(NormLogitError, ValueError):
    pass


class DegenerateSample(NormLogitError, ValueError):
    pass


class ConfigError(NormLogitError, ValueError):
    """Bad CLI configuration or input file."""
