"""Embedding-space similarity metrics.

CLAP-A is the mean pairwise cosine between two embedding sets, CLAP-T the
mean cosine against a single prompt embedding, and FAD the Frechet distance
between Gaussians fit to each set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DomainError

logger = logging.getLogger(__name__)

COV_RIDGE = 1e-6


@dataclass
class EmbeddingSet:
    """Uniform-dimension embedding vectors plus a provenance tag."""

    vectors: np.ndarray
    tag: str = ""

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if not np.all(np.isfinite(self.vectors)):
            raise DomainError(f"embedding set {self.tag!r} has non-finite entries")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, EmbeddingSet):
        return x.vectors
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


def _unit_rows(m: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise DomainError(f"{what} contains a zero vector")
    return m / norms[:, None]


def clap_a(gen, train) -> float:
    """Mean cosine over all cross pairs of the two sets."""
    g = _unit_rows(_as_matrix(gen), "generated set")
    t = _unit_rows(_as_matrix(train), "training set")
    if g.shape[1] != t.shape[1]:
        raise DomainError(f"embedding dims differ: {g.shape[1]} vs {t.shape[1]}")
    return float(np.mean(g @ t.T))


def clap_t(gen, prompt_embedding) -> float:
    """Mean cosine between each generated embedding and one prompt embedding."""
    prompt = np.asarray(prompt_embedding, dtype=np.float64).reshape(1, -1)
    return clap_a(gen, prompt)


def self_similarity(embeddings) -> float | None:
    """Mean cosine over distinct pairs within one set; None below two vectors."""
    m = _unit_rows(_as_matrix(embeddings), "embedding set")
    n = m.shape[0]
    if n < 2:
        return None
    sims = m @ m.T
    mask = ~np.eye(n, dtype=bool)
    return float(sims[mask].mean())


def _mean_cov(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = m.mean(axis=0)
    if m.shape[0] < 2:
        return mu, np.zeros((m.shape[1], m.shape[1]))
    return mu, np.atleast_2d(np.cov(m, rowvar=False, ddof=1))


def _sqrtm_psd(sym: np.ndarray) -> np.ndarray:
    """Matrix square root of a symmetric PSD matrix; negative eigenvalues clamp to 0."""
    vals, vecs = np.linalg.eigh((sym + sym.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fad(a, b) -> float:
    """Frechet distance between Gaussians fit to the two sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), with the
    inner square roots taken by symmetric eigendecomposition. Sets no larger
    than their dimension get a +1e-6 I covariance ridge (logged).
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape[1] != mb.shape[1]:
        raise DomainError(f"embedding dims differ: {ma.shape[1]} vs {mb.shape[1]}")
    dim = ma.shape[1]
    mu_a, cov_a = _mean_cov(ma)
    mu_b, cov_b = _mean_cov(mb)
    if ma.shape[0] <= dim or mb.shape[0] <= dim:
        logger.warning(
            "fad: set sizes (%d, %d) <= dim %d; regularizing covariance with +%g I",
            ma.shape[0], mb.shape[0], dim, COV_RIDGE,
        )
        cov_a = cov_a + COV_RIDGE * np.eye(dim)
        cov_b = cov_b + COV_RIDGE * np.eye(dim)

    root_a = _sqrtm_psd(cov_a)
    inner = _sqrtm_psd(root_a @ cov_b @ root_a)
    value = float(
        np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(inner)
    )
    return max(value, 0.0)
