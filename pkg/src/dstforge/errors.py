"""Exception types raised across dstforge."""


class DstError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class MalformedJson(DstError):
    pass


class SchemaInvalid(DstError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class MalformedLine(DstError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}" if reason else f"line {line_no}")


class AnnotationInvalid(DstError):
    def __init__(self, dialogue_id, turn, violations):
        self.dialogue_id = dialogue_id
        self.turn = turn
        self.violations = list(violations)
        super().__init__(f"dialogue {dialogue_id!r} turn {turn}: " + "; ".join(self.violations))


class IndexOutOfRange(DstError, IndexError):
    pass


class EmptyCorpus(DstError):
    pass


class UnknownTarget(DstError):
    pass


class ValueContainsScaffold(DstError):
    pass


class AnnotationMissing(DstError):
    pass


class SessionClosed(DstError):
    pass


class EmptyTrainingSet(DstError):
    pass


class UntokenizableGold(DstError):
    pass


class UntokenizableCandidate(DstError):
    pass


class EmptyValidSet(DstError):
    pass


class MalformedAnswer(DstError):
    pass


class SingleClassCorpus(DstError):
    pass


class NoDescriptiveFound(DstError):
    pass


class LengthMismatch(DstError):
    pass


class EmptyLabelSet(DstError):
    pass


class SpecInvalid(DstError):
    pass


class ProtocolError(DstError):
    exit_code = 3
