"""Exception hierarchy.

Every error carries a short machine code used by the CLI's ``ERROR <code>: <detail>`` line.
"""


class AverySimError(Exception):
    code = "E_SIM"


class InputError(AverySimError):
    """Bad user input: parse or validation failure (CLI exit 1)."""

    code = "E_INPUT"


class LUTError(InputError):
    code = "E_LUT"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MissingTier(LUTError):
    pass


class DuplicateTier(LUTError):
    pass


class MonotonicityViolation(LUTError):
    pass


class NonPositiveField(LUTError):
    pass


class InvalidLUT(LUTError):
    pass


class NonPositiveInput(InputError):
    code = "E_ARG"


class NonPositiveDataSize(InputError):
    code = "E_ARG"


class TraceError(InputError):
    code = "E_TRACE"


class EmptySegments(TraceError):
    pass


class InvalidBand(TraceError):
    pass


class OutOfTraceRange(AverySimError):
    code = "E_RANGE"


class ReversedInterval(AverySimError):
    code = "E_RANGE"


class ScenarioError(InputError):
    code = "E_SCENARIO"


class InvalidScenario(ScenarioError):
    pass


class TraceTooShort(ScenarioError):
    pass


class ContextPacketNotScorable(AverySimError):
    code = "E_SCORE"


class IOFailure(InputError):
    code = "E_IO"
