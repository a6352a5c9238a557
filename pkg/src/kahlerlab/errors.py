"""Exception hierarchy shared by every module."""


class KahlerLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(KahlerLabError, ValueError):
    """A point lies outside the validity window of a profile or metric."""


class ExpressionSyntaxError(KahlerLabError, ValueError):
    def __init__(self, position, expected, message=None):
        self.position = position
        self.expected = tuple(sorted(expected))
        msg = message or f"syntax error at offset {position}; expected one of {', '.join(self.expected)}"
        super().__init__(msg)


class UnboundParameter(KahlerLabError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound parameter {name!r}")

    def __str__(self):
        return self.args[0]


class InvalidExponent(KahlerLabError, ValueError):
    pass


class EvaluationError(KahlerLabError, ArithmeticError):
    """An integrand raised or returned a non-finite value."""


class InvalidTolerance(KahlerLabError, ValueError):
    pass


class NonIntegrableHint(KahlerLabError, ValueError):
    pass


class SameClassAtEndpoints(KahlerLabError, ValueError):
    pass


class DivergentDistance(KahlerLabError):
    def __init__(self, verdict):
        self.verdict = verdict
        super().__init__(f"radial distance to the origin diverges ({verdict.cls})")


class UnboundedPotential(KahlerLabError, ValueError):
    pass


class DegenerateMetric(KahlerLabError, ArithmeticError):
    pass


class EmptyGrid(KahlerLabError, ValueError):
    pass


class GrowthAssumptionViolated(KahlerLabError, ValueError):
    pass


class UnsupportedClass(KahlerLabError, TypeError):
    pass


class IllConditioned(KahlerLabError, ArithmeticError):
    pass


class DisconnectedMesh(KahlerLabError):
    pass


class UnknownCase(KahlerLabError, KeyError):
    pass


class ConfigError(KahlerLabError, ValueError):
    pass
