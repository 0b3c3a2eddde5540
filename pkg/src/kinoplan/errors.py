"""Exception types shared across the package."""


class KinoplanError(Exception):
    """Base class for every error raised by kinoplan."""


# geometry / model
class InvariantViolation(KinoplanError, ValueError):
    pass


class ZeroVector(KinoplanError, ValueError):
    pass


class OutOfLimits(KinoplanError, ValueError):
    pass


class DegenerateRadius(KinoplanError, ValueError):
    pass


class FixedJoint(KinoplanError, ValueError):
    pass


# description parser
class ParseError(KinoplanError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(KinoplanError, ValueError):
    def __init__(self, message: str, line: int | None = None, element: str | None = None):
        self.line = line
        self.element = element
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# action language
class GrammarError(KinoplanError, ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SequenceError(KinoplanError, ValueError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


# planner
class BadStep(KinoplanError, ValueError):
    pass


class InfeasibleTask(KinoplanError, ValueError):
    pass


# prompting
class PromptError(KinoplanError, ValueError):
    pass


class AlignmentError(KinoplanError, ValueError):
    """A manipulation plan cites a coordinate that is not in the description."""

    def __init__(self, message: str, value: str | None = None, step: int | None = None):
        self.value = value
        self.step = step
        super().__init__(message)


class EmptyPlan(KinoplanError, ValueError):
    pass


class NoActionsFound(KinoplanError, ValueError):
    pass


class ReplayMiss(KinoplanError, KeyError):
    pass


class LlmClientError(KinoplanError, RuntimeError):
    pass


class StageError(KinoplanError):
    """Failure inside one stage of the two-stage LLM planner."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")


# harness
class UnknownCategory(KinoplanError, KeyError):
    pass
