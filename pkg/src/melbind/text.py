"""Closed-vocabulary tokenizer, embedding table, and text encoder.

The vocabulary is frozen at corpus-construction time. Novel concepts enter
through placeholder strings that map to reserved ids with their own
embedding rows; a handful of rare identifier tokens is reserved in the base
vocabulary for DreamBooth-style "[identifier] [class noun]" prompts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import ConflictError, DomainError

UNK_TOKEN = "<unk>"
UNK_ID = 0
DEFAULT_RARE_TOKENS = ("sks", "zwx", "qvr", "ohwx")
EMBED_DIM = 64
COND_DIM = 64
TEXT_HIDDEN = 64
# Unit-scale embeddings keep the conditioning input comparable to the latent
# and time inputs, which the denoiser needs in order to learn to use it.
EMBED_INIT_STD = 1.0

_WORD_RE = re.compile(r"[a-z0-9']+")


class Vocab:
    """Ordered token list with reserved placeholder ids appended at the end."""

    def __init__(self, words: Iterable[str], rare_tokens: Iterable[str] = DEFAULT_RARE_TOKENS):
        seen = {UNK_TOKEN}
        tokens = [UNK_TOKEN]
        for word in list(words) + list(rare_tokens):
            w = word.lower().strip()
            if w and w not in seen:
                seen.add(w)
                tokens.append(w)
        self.tokens: list[str] = tokens
        self.rare_tokens = [t.lower() for t in rare_tokens]
        self.base_size = len(tokens)
        self.placeholder_ids: dict[str, int] = {}
        self._index = {t: i for i, t in enumerate(tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def word_ids(self) -> range:
        """Ids of real base-vocabulary words (excludes <unk> and placeholders)."""
        return range(1, self.base_size)

    def id_of(self, word: str) -> int:
        return self._index.get(word.lower(), UNK_ID)

    def has_word(self, word: str) -> bool:
        return word.lower() in self._index

    def register_placeholder(self, s_star: str) -> int:
        key = s_star.lower().strip()
        if not key:
            raise DomainError("placeholder string is empty")
        if key in self.placeholder_ids:
            raise ConflictError(f"placeholder {s_star!r} already registered")
        if key in self._index:
            raise ConflictError(f"placeholder {s_star!r} collides with a vocabulary word")
        new_id = len(self.tokens)
        self.tokens.append(key)
        self._index[key] = new_id
        self.placeholder_ids[key] = new_id
        return new_id

    def copy(self) -> "Vocab":
        dup = Vocab.__new__(Vocab)
        dup.tokens = list(self.tokens)
        dup.rare_tokens = list(self.rare_tokens)
        dup.base_size = self.base_size
        dup.placeholder_ids = dict(self.placeholder_ids)
        dup._index = dict(self._index)
        return dup


def tokenize(prompt: str, vocab: Vocab) -> list[int]:
    """Lowercase, split on whitespace and punctuation; placeholders survive intact.

    Unknown words map to the UNK id. Total function: never raises.
    """
    ids: list[int] = []
    for piece in prompt.lower().split():
        if piece in vocab.placeholder_ids:
            ids.append(vocab.placeholder_ids[piece])
            continue
        for word in _WORD_RE.findall(piece):
            ids.append(vocab._index.get(word, UNK_ID))
    return ids


@dataclass
class EmbeddingTable:
    """Token embeddings with a per-row trainable flag."""

    vectors: np.ndarray
    trainable_mask: np.ndarray

    @classmethod
    def init(cls, vocab_size: int, dim: int = EMBED_DIM, seed: int = 0,
             scale: float | None = None) -> "EmbeddingTable":
        rng = np.random.default_rng(seed)
        if scale is None:
            scale = EMBED_INIT_STD
        vectors = rng.normal(0.0, scale, size=(vocab_size, dim))
        return cls(vectors, np.zeros(vocab_size, dtype=bool))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.vectors.copy(), self.trainable_mask.copy())

    def trainable_rows(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.trainable_mask)]


def add_placeholder(
    table: EmbeddingTable,
    vocab: Vocab,
    s_star: str,
    init: Literal["BL", "MW"],
    class_noun: Optional[str] = None,
) -> int:
    """Register S_* and append its embedding row.

    BL initializes from the mean of all base word embeddings; MW from the
    mean of the class-noun token embeddings. The new row is the only one
    marked trainable.
    """
    if init == "MW":
        if not class_noun:
            raise DomainError("MW initialization requires a class noun")
        noun_ids = [i for i in tokenize(class_noun, vocab) if i != UNK_ID]
        if not noun_ids:
            raise DomainError(f"class noun {class_noun!r} has no known tokens")
        row = table.vectors[noun_ids].mean(axis=0)
    elif init == "BL":
        word_rows = table.vectors[list(vocab.word_ids)]
        row = word_rows.mean(axis=0)
    else:
        raise DomainError(f"unknown initialization {init!r}")

    new_id = vocab.register_placeholder(s_star)
    if new_id != table.vectors.shape[0]:
        raise ConflictError(
            f"embedding table has {table.vectors.shape[0]} rows but vocab expects id {new_id}"
        )
    table.vectors = np.vstack([table.vectors, row[None, :]])
    table.trainable_mask = np.concatenate([np.zeros_like(table.trainable_mask), [True]])
    return new_id


@dataclass
class TextEncoderParams:
    """Two-layer projection from mean-pooled embeddings to the conditioning vector."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_e: int = EMBED_DIM, d_c: int = COND_DIM, hidden: int = TEXT_HIDDEN,
             seed: int = 1) -> "TextEncoderParams":
        rng = np.random.default_rng(seed)
        w1 = rng.normal(0.0, 1.0 / np.sqrt(d_e), size=(hidden, d_e))
        w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(d_c, hidden))
        return cls(w1, np.zeros(hidden), w2, np.zeros(d_c))

    @property
    def cond_dim(self) -> int:
        return self.w2.shape[0]

    def param_count(self) -> int:
        return sum(p.size for p in (self.w1, self.b1, self.w2, self.b2))

    def copy(self) -> "TextEncoderParams":
        return TextEncoderParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass
class TextForwardCache:
    ids: list[int]
    pool: np.ndarray
    a1: np.ndarray


def encode_text_cached(
    params: TextEncoderParams, table: EmbeddingTable, ids: list[int]
) -> tuple[np.ndarray, TextForwardCache]:
    if len(ids) == 0:
        raise DomainError("cannot encode an empty token sequence")
    pool = table.vectors[ids].mean(axis=0)
    a1 = np.tanh(params.w1 @ pool + params.b1)
    cond = params.w2 @ a1 + params.b2
    return cond, TextForwardCache(list(ids), pool, a1)


def encode_text(params: TextEncoderParams, table: EmbeddingTable, ids: list[int]) -> np.ndarray:
    """Mean-pool embedding rows and project. Order-invariant by construction."""
    cond, _ = encode_text_cached(params, table, ids)
    return cond


def backprop_text(
    params: TextEncoderParams,
    cache: TextForwardCache,
    d_cond: np.ndarray,
    text_grads: Optional[dict] = None,
    row_grads: Optional[dict] = None,
) -> None:
    """Accumulate gradients of a scalar loss through encode_text.

    `text_grads` holds w1/b1/w2/b2 buffers; `row_grads` maps token id to a
    d_e-sized buffer. Either may be None to skip that parameter group.
    """
    da1 = params.w2.T @ d_cond
    dt1 = da1 * (1.0 - cache.a1**2)
    if text_grads is not None:
        text_grads["b2"] += d_cond
        text_grads["w2"] += np.outer(d_cond, cache.a1)
        text_grads["b1"] += dt1
        text_grads["w1"] += np.outer(dt1, cache.pool)
    if row_grads is not None:
        dpool = params.w1.T @ dt1
        share = dpool / len(cache.ids)
        for token_id in cache.ids:
            if token_id in row_grads:
                row_grads[token_id] += share
