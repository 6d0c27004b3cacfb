"""Error types raised by the safety filter library"""

from typing import Optional


class SafetyFilterError(Exception):
    """Base class for all library errors"""


class DomainError(SafetyFilterError, ArithmeticError):
    """Operation undefined on the given interval, box or point"""


class ExpressionError(SafetyFilterError, ValueError):
    """Expression text is not a polynomial over the declared variables"""


class ConvergenceError(SafetyFilterError, RuntimeError):
    """A series or fixed-point enclosure did not converge"""


class RelativeDegreeError(SafetyFilterError, ValueError):
    """Barrier relative degree undefined or inconsistent with its parameters"""


class InfeasibleInputSet(SafetyFilterError, ValueError):
    """Input box becomes empty after shrinking by the actuation bound"""


class DivergenceError(SafetyFilterError, RuntimeError):
    """Integrated state became non-finite"""


class InitialConditionError(SafetyFilterError, ValueError):
    """Initial state fails the barrier chain check; the episode is refused"""


class ScenarioError(SafetyFilterError, ValueError):
    """Scenario file failed to parse or validate"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        """Initialize with optional field and line diagnostics"""
        self.field = field
        self.line = line
        location = ""
        if field is not None:
            location += f" [{field}"
            if line is not None:
                location += f", line {line}"
            location += "]"
        super().__init__(f"{message}{location}")
