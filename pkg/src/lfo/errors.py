"""Exception hierarchy shared by every stage of the encoder."""


class LfoError(Exception):
    """Base class for all errors raised by this package."""


# task grammar and documents

class MalformedLabel(LfoError):
    pass


class NonCanonicalTask(LfoError):
    pass


class ValidationError(LfoError):
    """A task chain broke the grasp-manipulation-release grammar.

    ``index`` is the position of the first offending task and ``reason`` one of
    ``NotGraspFirst``, ``NotReleaseLast``, ``ChainBreak`` or ``NonCanonicalTask``.
    """

    def __init__(self, index: int, reason: str, detail: str = ""):
        self.index = index
        self.reason = reason
        self.detail = detail
        msg = f"{reason} at index {index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SchemaViolation(LfoError):
    pass


# posture

class DegenerateSkeleton(LfoError):
    pass


class NotUnit(LfoError):
    pass


class AllFramesInvalid(LfoError):
    pass


class CoverageGap(LfoError):
    pass


# segmentation

class NoActionVerb(LfoError):
    pass


class NoTargetObject(LfoError):
    pass


class NoGraspDetected(LfoError):
    pass


class EmptySegment(LfoError):
    pass


# task detection

class KbChainError(LfoError):
    pass


class DuplicateVerb(LfoError):
    pass


class UnknownVerb(LfoError):
    pass


class AmbiguityUnresolved(LfoError):
    pass


class ChainConflict(LfoError):
    pass


class InitialStateMismatch(LfoError):
    pass


# geometry

class DegenerateTrajectory(LfoError):
    def __init__(self, message: str, task_index: int | None = None):
        self.task_index = task_index
        if task_index is not None:
            message = f"task {task_index}: {message}"
        super().__init__(message)


class DegeneratePlane(LfoError):
    pass


class DegenerateLine(LfoError):
    pass


class DegenerateCircle(LfoError):
    pass


class InsufficientSamples(LfoError):
    pass


class NoContactSignature(LfoError):
    pass


class KindMismatch(LfoError):
    pass


class LocationUnknown(LfoError):
    pass


# playback

class StateMismatch(LfoError):
    def __init__(self, task_index: int, expected, achieved):
        self.task_index = task_index
        self.expected = expected
        self.achieved = achieved
        super().__init__(
            f"task {task_index}: expected {getattr(expected, 'value', expected)}, "
            f"achieved {getattr(achieved, 'value', achieved)}"
        )


class InvalidScenarioParams(LfoError):
    pass
