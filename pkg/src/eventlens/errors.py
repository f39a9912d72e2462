"""Exception taxonomy shared across the engine.

Grouped by the layer that raises them; everything derives from EventLensError
so callers can catch broadly at the CLI boundary.
"""

from __future__ import annotations


class EventLensError(Exception):
    """Base class for all engine errors."""


# ---------------------------------------------------------------- numerics


class DimensionMismatch(EventLensError):
    """Two vectors of different lengths were combined."""


class ZeroVector(EventLensError):
    """A zero-magnitude vector reached a cosine computation."""


class EmptyInput(EventLensError):
    """An aggregate over zero elements was requested."""


class NonFiniteEntry(EventLensError):
    """A score matrix contained NaN or infinity."""


# ---------------------------------------------------------------- ingest


class ManifestNotFound(EventLensError):
    """Manifest path does not exist."""


class ManifestParseError(EventLensError):
    """Manifest file is not valid JSON."""


class ManifestValidationError(EventLensError):
    """Manifest JSON violates the frame-manifest contract."""


class InvalidFps(EventLensError):
    """Sampling rate must be positive and finite."""


# ---------------------------------------------------------------- providers


class ProviderUnavailable(EventLensError):
    """Remote endpoint stayed unreachable after the retry budget."""


class BadResponse(EventLensError):
    """Provider reply failed schema or semantic validation."""


class ContextOverflow(BadResponse):
    """Prompt exceeded the provider's context limit; shrink N_F or N_D."""


class EmptyText(EventLensError):
    """Text-valued provider input was empty or whitespace."""


class EmptyCompletion(EventLensError):
    """LLM reply contained no usable line."""


# ---------------------------------------------------------------- algorithms


class TooFewFrames(EventLensError):
    """Video too short for the requested number of event centers."""


class NoAssertions(EventLensError):
    """Instruction decomposition produced zero assertions."""


# ---------------------------------------------------------------- tasks


class MissingQuestion(EventLensError):
    """QA prompt requested without question and options."""


class AmbiguousAnswer(EventLensError):
    """LLM reply could not be mapped to exactly one option."""


class IdMismatch(EventLensError):
    """Prediction ids and dataset ids do not line up."""


class DataError(EventLensError):
    """Dataset file missing, unparsable, or inconsistent."""


class ConfigError(EventLensError):
    """Run configuration is malformed or contains unknown keys."""
