"""Exception taxonomy shared across the pipeline."""
from __future__ import annotations


class PapError(Exception):
    """Base class for all pipeline errors."""


class InvalidSpec(PapError):
    """Viewport spec violates its invariants (e.g. hfov outside (0, 180))."""


class DegenerateRay(PapError):
    """Zero-norm ray cannot be converted to spherical coordinates."""


class DimensionMismatch(PapError):
    """Raster dimensions disagree with what the operation requires."""


class MaskDimMismatch(DimensionMismatch):
    """A backend returned a mask whose dims differ from the prompt image."""


class GridTooDense(PapError):
    """Grid cells too small for the requested font size."""


class BadIndex(PapError):
    """Grid index outside [1, cols*rows]."""


class DegenerateRegion(PapError):
    """Zero-area region cannot be turned into a viewport."""


class BackendError(PapError):
    """Transport-level failure talking to a model backend."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class Timeout(BackendError):
    """Backend did not answer within timeout_s (after retries)."""


class UnparseableResponse(PapError):
    """VLM reply contained no valid JSON object after all reprompts."""


class EmptyGridBoxes(PapError):
    """VLM reply parsed but selected no grid cells."""


class NoDetection(PapError):
    """Detector returned no boxes for the query."""


class ConfigError(PapError):
    """Config file failed schema validation."""


class UnknownImage(PapError):
    """Mock server could not resolve the request to a dataset record."""


class DatasetFormatError(PapError):
    """Annotation record is malformed; carries the record id and reason."""

    def __init__(self, record_id: str, reason: str):
        super().__init__(f"record {record_id!r}: {reason}")
        self.record_id = record_id
        self.reason = reason


class EmptyEvaluation(PapError):
    """Metric aggregation over zero samples."""


class PipelineError(PapError):
    """A pipeline stage failed; partial intermediates are retained.

    ``partial`` is a PipelineResult with every field up to the failing
    stage populated and the rest None.
    """

    def __init__(self, stage: str, cause: Exception, partial=None):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial


class GroundingFailed(PipelineError):
    """Detection failed even after the query and whole-frame fallbacks."""
