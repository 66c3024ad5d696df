"""Exception hierarchy.

Configuration problems (bad expressions, bad problem files) derive from
:class:`ConfigurationError`; numerical breakdowns (singular systems,
divergent Newton iterations, unsolvable resonant orders) derive from
:class:`NumericalFailure`.  The CLI maps the two families to distinct exit
codes.
"""


class FredpertError(Exception):
    pass


class ConfigurationError(FredpertError, ValueError):
    pass


class ExpressionError(ConfigurationError):
    pass


class ParseError(ExpressionError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position


class EvaluationError(ExpressionError):
    """Unbound variable or a domain violation (log/sqrt/division)."""


class ExpressionTooLarge(ExpressionError):
    pass


class NumericalFailure(FredpertError, ArithmeticError):
    pass


class CharacteristicValueError(NumericalFailure):
    """Raised when ``I - omega*K`` is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NewtonDivergenceError(NumericalFailure):
    pass


class ResonanceError(NumericalFailure):
    """A resonant series order violates the solvability condition."""

    def __init__(self, order, residual):
        super().__init__(f"resonant order {order} unsolvable (obstruction {residual:.3e})")
        self.order = order
        self.residual = residual
