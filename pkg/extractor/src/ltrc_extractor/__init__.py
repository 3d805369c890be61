"""Per-layer hidden-state extraction into the LTRC trace format."""

from .extract import ExtractionJob, extract, render_prompt
from .ltrc import write_ltrc
from .model import ByteTokenizer, TinyDecoder

__version__ = "0.1.0"
