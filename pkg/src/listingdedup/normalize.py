"""Encodings and distances used to compare two ads."""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from rapidfuzz.distance import Levenshtein

from .model import DEFAULT_SCHEMES, GeoPoint, OrderedLevelScheme

EARTH_RADIUS_M = 6_371_008.8
_TOKEN = re.compile(r"\w+", re.UNICODE)


def encode_ordered(trait, label, scheme: OrderedLevelScheme | None = None):
    """Integer level (1 = worst) of ``label``; ``None`` stays ``None``.

    Raises ``KeyError`` for a label the scheme does not know.
    """
    if label is None:
        return None
    scheme = DEFAULT_SCHEMES[trait] if scheme is None else scheme
    if scheme.trait != trait:
        raise ValueError(f"scheme is for {scheme.trait!r}, not {trait!r}")
    return scheme.level(label)


# --- text embeddings --------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    provider: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError("embedding must be a finite 1-d vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def tokenize(text: str) -> list:
    return _TOKEN.findall(text.lower())


class HashedEmbedding:
    """Deterministic bag-of-tokens embedding.

    Each lowercase word token is hashed into one of ``dimension`` buckets;
    a bucket holding ``c`` occurrences gets weight ``1 + log(c)``.
    """

    name = "hashed"

    def __init__(self, dimension: int = 256, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=False)
        self._buckets = {}

    def bucket(self, token: str) -> int:
        b = self._buckets.get(token)
        if b is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
            b = self._buckets[token] = int.from_bytes(digest, "little") % self.dimension
        return b

    def counts(self, text: str | None) -> np.ndarray:
        out = np.zeros(self.dimension)
        for token in tokenize(text or ""):
            out[self.bucket(token)] += 1.0
        return out

    def embed(self, text: str | None) -> EmbeddingVector:
        counts = self.counts(text)
        nz = counts > 0
        counts[nz] = 1.0 + np.log(counts[nz])
        return EmbeddingVector(counts, self.name)

    def embed_many(self, texts) -> np.ndarray:
        return np.vstack([self.embed(t).values for t in texts]) if texts else np.zeros((0, self.dimension))


class ExternalEmbeddings:
    """Vectors computed elsewhere (e.g. a paragraph-vector model), keyed by ad id."""

    name = "external"

    def __init__(self, vectors: dict):
        dims = {len(v) for v in vectors.values()}
        if len(dims) > 1:
            raise ValueError("external embeddings have mixed dimensions")
        self.vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        self.dimension = dims.pop() if dims else 0

    @classmethod
    def from_csv(cls, path) -> "ExternalEmbeddings":
        vectors = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0] == "id":
                    continue
                vectors[row[0]] = [float(x) for x in row[1:]]
        return cls(vectors)

    def embed_id(self, ad_id: str) -> EmbeddingVector:
        vec = self.vectors.get(ad_id)
        if vec is None:
            return EmbeddingVector(np.zeros(self.dimension), self.name)
        return EmbeddingVector(vec, self.name)


def embed_description(text, provider=None, ad_id=None) -> EmbeddingVector:
    """Embed an ad description; external providers look the vector up by ``ad_id``."""
    provider = HashedEmbedding() if provider is None else provider
    if isinstance(provider, ExternalEmbeddings):
        return provider.embed_id(ad_id)
    return provider.embed(text)


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)``, in [0, 2]; a zero vector is at distance 1 from anything."""
    a = a.values if isinstance(a, EmbeddingVector) else np.asarray(a, dtype=float)
    b = b.values if isinstance(b, EmbeddingVector) else np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0
    cos = float(a @ b) / (na * nb)
    return float(min(2.0, max(0.0, 1.0 - cos)))


def cosine_distance_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise cosine distance between two equally shaped matrices."""
    if A.shape != B.shape:
        raise ValueError("dimension mismatch")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    denom = na * nb
    out = np.ones(A.shape[0])
    ok = denom > 0
    out[ok] = 1.0 - np.einsum("ij,ij->i", A[ok], B[ok]) / denom[ok]
    return np.clip(out, 0.0, 2.0)


# --- strings and places -----------------------------------------------------


def levenshtein_norm(s: str | None, t: str | None) -> float:
    """Edit distance divided by the longer length; 0 for two empty strings."""
    s, t = s or "", t or ""
    longest = max(len(s), len(t))
    if longest == 0:
        return 0.0
    return Levenshtein.distance(s, t) / longest


def geo_distance_m(p: GeoPoint, q: GeoPoint) -> float:
    """Great-circle (haversine) distance in meters."""
    return float(haversine_m(p.lat, p.lon, q.lat, q.lon))


def haversine_m(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


# --- configuration ----------------------------------------------------------


def load_normalize_config(path):
    """Read level schemes and embedding settings from a TOML file.

    Recognised tables::

        [levels]
        maintenance = ["to be fully renovated", ..., "new"]

        [embedding]
        provider = "hashed"        # or "external"
        dimension = 256
        seed = 0
        vectors = "embeddings.csv" # external only: id,v1,...,vN rows

    Returns ``(schemes, provider)``.
    """
    from .config import tomllib

    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    return schemes_from_config(cfg), provider_from_config(cfg, Path(path).parent)


def schemes_from_config(cfg: dict):
    schemes = dict(DEFAULT_SCHEMES)
    for trait, labels in (cfg.get("levels") or {}).items():
        if trait not in schemes:
            raise ValueError(f"unknown ordered trait {trait!r}")
        schemes[trait] = OrderedLevelScheme(trait, tuple(labels))
    return schemes


def provider_from_config(cfg: dict, base=Path(".")):
    emb = cfg.get("embedding") or {}
    kind = emb.get("provider", "hashed")
    if kind == "hashed":
        return HashedEmbedding(int(emb.get("dimension", 256)), int(emb.get("seed", 0)))
    if kind == "external":
        return ExternalEmbeddings.from_csv(base / emb["vectors"])
    raise ValueError(f"unknown embedding provider {kind!r}")


def relative_difference(a, b):
    """``|a - b| / min(a, b)`` (vectorised); NaN propagates."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs(a - b) / np.minimum(a, b)


__all__ = [
    "EmbeddingVector",
    "ExternalEmbeddings",
    "HashedEmbedding",
    "cosine_distance",
    "cosine_distance_rows",
    "embed_description",
    "encode_ordered",
    "geo_distance_m",
    "haversine_m",
    "levenshtein_norm",
    "load_normalize_config",
    "relative_difference",
    "tokenize",
]
