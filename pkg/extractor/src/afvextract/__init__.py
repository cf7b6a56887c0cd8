"""Export frozen vision-encoder features from image directories into AFV1
feature files consumable by the attribution-space detector pipeline."""

from .afv import write_afv
from .encoders import (
    DEFAULT_ENCODER,
    EncoderUnavailableError,
    available_encoders,
    load_encoder,
)
from .extract import DirectorySpec, ExtractJob, ExtractReport, extract

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ENCODER",
    "DirectorySpec",
    "EncoderUnavailableError",
    "ExtractJob",
    "ExtractReport",
    "available_encoders",
    "extract",
    "load_encoder",
    "write_afv",
]
