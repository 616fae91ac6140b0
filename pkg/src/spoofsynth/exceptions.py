"""Exception hierarchy.

Every error carries a ``category`` used by the CLI to pick an exit code:
``UsageError`` (2), ``DataError`` (3), ``RuntimeFailure`` (4).
"""


class SpoofSynthError(Exception):
    category = "RuntimeFailure"


class UsageError(SpoofSynthError):
    category = "UsageError"


class DataError(SpoofSynthError, ValueError):
    category = "DataError"


class RuntimeFailure(SpoofSynthError, RuntimeError):
    category = "RuntimeFailure"


# text frontend
class EmptyInput(DataError):
    pass


class OutOfLexicon(DataError):
    def __init__(self, char, position):
        super().__init__(f"character {char!r} at position {position} has no lexicon entry")
        self.char = char
        self.position = position


class UnknownSymbol(DataError):
    pass


# audio / data
class SilentClip(DataError):
    pass


class SpeakerTooSmall(DataError):
    def __init__(self, speaker_id):
        super().__init__(f"speaker {speaker_id!r} has fewer than 2 utterances")
        self.speaker_id = speaker_id


class TooShort(DataError):
    pass


class BadFormat(DataError):
    pass


class FingerprintMismatch(DataError):
    pass


# model
class ShapeMismatch(DataError):
    pass


class InfeasibleShape(DataError):
    pass


class UnknownSpeaker(DataError):
    pass


class EmptySequence(DataError):
    pass


class BadLayer(DataError):
    pass


class NegativeNoise(DataError):
    pass


class NegativeScale(DataError):
    pass


# evaluation
class EmptyScoreSet(DataError):
    pass


class DetectorFailure(RuntimeFailure):
    def __init__(self, utterance_id, reason=""):
        super().__init__(f"detector failed on {utterance_id}: {reason}".rstrip(": "))
        self.utterance_id = utterance_id


class DuplicateLabel(UsageError):
    pass


class NonFiniteLoss(RuntimeFailure):
    def __init__(self, term, value):
        super().__init__(f"loss term {term!r} is not finite ({value})")
        self.term = term
