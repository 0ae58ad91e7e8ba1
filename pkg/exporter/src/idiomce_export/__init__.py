"""IDCE embedding export and cultural-element generation."""

from .backends import HashedEncoder, make_encoder
from .errors import EmptyField, ExporterError, ModelUnavailable, ProviderError, UnparseableReply
from .exporter import ExportJob, embed_corpus
from .formats import read_idce, read_idiom_jsonl, write_idce, write_idiom_jsonl
from .generate import GenerationReport, generate_cultural_elements, parse_sections

__version__ = "0.1.0"
