"""Text encoders. The default is a deterministic feature-hashing encoder that
needs no model weights; any other model id is treated as a pretrained
sentence-transformers checkpoint."""

from __future__ import annotations

import hashlib
import re

import numpy as np

DEFAULT_MODEL = "hash:256"

_TOKEN = re.compile(r"[a-z0-9]+")


class ExportError(Exception):
    pass


class HashingEncoder:
    """Signed feature hashing of lowercase alphanumeric tokens, L2-normalized.

    Bit-identical across runs and platforms (blake2b bucket assignment). A
    bias bucket keeps empty texts off the zero vector.
    """

    def __init__(self, dim: int = 256):
        if dim < 2:
            raise ExportError(f"hashing encoder needs dim >= 2, got {dim}")
        self.dim = dim

    @property
    def name(self) -> str:
        return f"hash:{self.dim}"

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        return value % self.dim, 1.0 if (value >> 63) & 1 else -1.0

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in _TOKEN.findall(text.lower()):
                bucket, sign = self._bucket(token)
                out[row, bucket] += sign
            bias, sign = self._bucket("\x00bias")
            out[row, bias] += sign
        return out / np.linalg.norm(out, axis=1, keepdims=True)


class SentenceTransformerEncoder:
    """Pretrained sentence encoder; vectors are normalized at encode time."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as err:
            raise ExportError(
                f"model {model_id!r} needs the sentence-transformers extra"
            ) from err
        try:
            self.model = SentenceTransformer(model_id)
        except Exception as err:
            raise ExportError(f"could not load model {model_id!r}: {err}") from err
        self.model_id = model_id

    @property
    def name(self) -> str:
        return self.model_id

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        vectors = self.model.encode(
            texts,
            batch_size=batch_size,
            convert_to_numpy=True,
            normalize_embeddings=True,
            show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float64)


def get_encoder(model_id: str = DEFAULT_MODEL):
    if model_id.startswith("hash:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError:
            raise ExportError(f"bad hashing model id {model_id!r}") from None
        return HashingEncoder(dim)
    return SentenceTransformerEncoder(model_id)
