"""Exception hierarchy shared across the package.

Three broad families map onto CLI exit codes: configuration problems
(exit 2), data problems (exit 3), and runtime failures (exit 4).
"""


class AvemoError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class ConfigError(AvemoError):
    exit_code = 2


class DataError(AvemoError):
    exit_code = 3


class RuntimeFailure(AvemoError):
    exit_code = 4


# -- manifests and records ---------------------------------------------------

class MalformedManifest(DataError):
    """Manifest file cannot be parsed at all (syntax level)."""


class InvariantViolation(DataError):
    """A record violates a structural invariant.

    Carries the record index and offending field when known.
    """

    def __init__(self, message, record_index=None, field=None):
        super().__init__(message)
        self.record_index = record_index
        self.field = field


class MissingMedia(DataError):
    """A referenced media file does not exist."""


class MissingField(DataError):
    """A record lacks a field required by the requested objective."""


class UnknownEmotion(DataError):
    """Emotion label not present in the active vocabulary."""


# -- media decoding ----------------------------------------------------------

class EmptyAudio(DataError):
    pass


class EmptyVideo(DataError):
    pass


class SampleRateMismatch(DataError):
    def __init__(self, message, expected=None, actual=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class DecodeError(DataError):
    """Media file exists but cannot be decoded."""


# -- model-side --------------------------------------------------------------

class EmptyInput(DataError):
    pass


class ShapeMismatch(RuntimeFailure):
    pass


class DoubleMerge(RuntimeFailure):
    """An adapter was merged into base weights twice without a reset."""


class ContextOverflow(DataError):
    """Assembled sequence exceeds the decoder context even after truncation."""


class ParseError(DataError):
    """Generated output does not follow the emotion-tagged grammar (strict mode)."""


# -- training ----------------------------------------------------------------

class EmptyTarget(DataError):
    """Loss mask selects no position."""


class FrozenGroupViolation(RuntimeFailure):
    """A parameter declared frozen for the stage changed during training."""


class NonFiniteLoss(RuntimeFailure):
    pass


# -- evaluation --------------------------------------------------------------

class EmptyCorpus(DataError):
    pass


class ScorerFailure(RuntimeFailure):
    pass


# -- serving -----------------------------------------------------------------

class UnknownSession(DataError):
    pass


class ServerNotReady(RuntimeFailure):
    pass


class TurnTooLarge(DataError):
    """A single round exceeds the session token budget on its own."""


class GenerationTimeout(RuntimeFailure):
    pass
