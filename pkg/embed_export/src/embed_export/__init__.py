"""embed_export: offline embedding and score-cache export for the toolrank engine."""

from .encoders import (
    DEFAULT_MODEL,
    ExportError,
    HashingEncoder,
    SentenceTransformerEncoder,
    get_encoder,
)
from .exporter import ExportJob, export_embeddings, export_scores, read_pairs

__version__ = "0.1.0"
