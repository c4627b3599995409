"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`CollapseKitError`
so callers (and the CLI exit-code mapping) can distinguish numerical
failures from configuration mistakes.
"""


class CollapseKitError(Exception):
    """Base class for all library errors."""


class InvalidParams(CollapseKitError):
    """Distribution or model parameters violate their invariants."""


class NumericalError(CollapseKitError):
    """A numerical kernel could not produce a trustworthy value."""


class NonConvergence(NumericalError):
    """Adaptive quadrature hit its subdivision cap above tolerance."""

    def __init__(self, msg, value=None, err_estimate=None):
        super().__init__(msg)
        self.value = value
        self.err_estimate = err_estimate


class NonFiniteEvaluation(NumericalError):
    """An integrand or difference stencil returned NaN or infinity."""


class StepUnderflow(NumericalError):
    """No usable finite-difference stencil fits inside the domain."""


class NonPositiveDensity(NumericalError):
    """A log-density stencil hit a point where the density is <= 0."""


class NonPositiveMean(NumericalError):
    """Log-expectation slope requested where the mean is not positive."""


class DegenerateProbability(NumericalError):
    """Binary class probability is 0 or 1 where log-odds are needed."""


class DegenerateConditional(NumericalError):
    """Conditioning event has density below the usable floor."""


class MissingCapability(CollapseKitError):
    """The model does not declare the part an operation requires."""


class FactorizationViolated(CollapseKitError):
    """Declared covariate independence fails its registration check."""


class RankDeficient(CollapseKitError):
    """Regression design matrix is not full rank."""


class Separation(CollapseKitError):
    """Logistic fit diverged: data are perfectly separated."""


class NotConverged(CollapseKitError):
    """Iterative fit exhausted its iteration budget."""


class Underdispersed(CollapseKitError):
    """Moment estimate of the dispersion parameter is undefined."""


class UnknownScenario(CollapseKitError):
    """Requested scenario name is not in the catalog."""


class ConfigError(CollapseKitError):
    """Malformed CLI configuration or usage (exit code 2)."""


class ExpressionSyntaxError(ConfigError):
    """Expression text failed to parse; carries a byte offset."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} (offset {offset})")
        self.offset = offset


class UnknownIdentifier(ConfigError):
    """Expression references a name outside the closed vocabulary."""


class ArityMismatch(ConfigError):
    """Expression calls a function with the wrong argument count."""
