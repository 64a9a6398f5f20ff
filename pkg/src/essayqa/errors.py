"""Exception types shared across the engine."""


class EssayQAError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EssayQAError):
    """Input data violates a documented invariant (bad offsets, empty fields, ...)."""


class OversizedQuestionError(EssayQAError):
    """Question tokens alone exhaust the sequence budget; no essay token fits."""


class VocabularyError(EssayQAError):
    """Vocabulary file malformed or inconsistent with the model."""


class CheckpointError(EssayQAError):
    """Checkpoint file unreadable, wrong magic, or inconsistent with its header."""


class PlanError(EssayQAError):
    """Experiment or training plan is unresolvable or malformed."""
