"""Noise schedule, denoiser network, training loss with analytic gradients,
and the ancestral sampler.

The denoiser is a plain feedforward network over
[latent | sinusoidal time embedding | conditioning]. Gradients are derived
by hand so every trainable parameter can be checked against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericsError
from .text import EmbeddingTable, TextEncoderParams, backprop_text, encode_text_cached

N_STEPS = 100
BETA_1 = 1e-4
BETA_N = 0.02
TIME_DIM = 32
DENOISER_HIDDEN = 256


@dataclass
class NoiseSchedule:
    """Linear beta schedule with cumulative products (alpha_bar[0] == 1)."""

    beta: np.ndarray
    alpha_bar: np.ndarray

    @property
    def n(self) -> int:
        return len(self.beta)

    def tensors(self) -> dict[str, np.ndarray]:
        return {"beta": self.beta, "alpha_bar": self.alpha_bar}


def make_schedule(n: int = N_STEPS, beta_1: float = BETA_1, beta_n: float = BETA_N) -> NoiseSchedule:
    if n < 2:
        raise DomainError(f"need at least 2 steps, got {n}")
    if not (0.0 < beta_1 <= beta_n < 1.0):
        raise DomainError(f"invalid beta bounds ({beta_1}, {beta_n})")
    beta = np.linspace(beta_1, beta_n, n)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - beta)])
    return NoiseSchedule(beta, alpha_bar)


def time_embedding(t: int | np.ndarray, n_steps: int, dim: int = TIME_DIM) -> np.ndarray:
    """Sinusoidal embedding with periods geometric from 1 to n_steps."""
    periods = np.geomspace(1.0, float(n_steps), dim // 2)
    angles = np.atleast_1d(np.asarray(t, dtype=np.float64))[:, None] / periods[None, :]
    emb = np.empty((angles.shape[0], dim))
    emb[:, 0::2] = np.sin(angles)
    emb[:, 1::2] = np.cos(angles)
    return emb[0] if np.isscalar(t) or np.ndim(t) == 0 else emb


def forward_noise(z0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps. t = 0 returns z0."""
    if not 0 <= t <= sched.n:
        raise DomainError(f"t={t} outside 0..{sched.n}")
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


@dataclass
class DenoiserParams:
    """Feedforward noise predictor; the final layer is bias-free."""

    a1: np.ndarray
    c1: np.ndarray
    a2: np.ndarray
    c2: np.ndarray
    a3: np.ndarray

    @classmethod
    def init(
        cls,
        latent_dim: int = 256,
        time_dim: int = TIME_DIM,
        cond_dim: int = 64,
        hidden: int = DENOISER_HIDDEN,
        seed: int = 2,
    ) -> "DenoiserParams":
        rng = np.random.default_rng(seed)
        d_in = latent_dim + time_dim + cond_dim
        a1 = rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(hidden, d_in))
        a2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, hidden))
        a3 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(latent_dim, hidden))
        return cls(a1, np.zeros(hidden), a2, np.zeros(hidden), a3)

    @property
    def latent_dim(self) -> int:
        return self.a3.shape[0]

    @property
    def input_dim(self) -> int:
        return self.a1.shape[1]

    def param_count(self) -> int:
        return sum(p.size for p in (self.a1, self.c1, self.a2, self.c2, self.a3))

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(*(p.copy() for p in (self.a1, self.c1, self.a2, self.c2, self.a3)))

    def tensors(self) -> dict[str, np.ndarray]:
        return {"a1": self.a1, "c1": self.c1, "a2": self.a2, "c2": self.c2, "a3": self.a3}


def denoiser_forward(params: DenoiserParams, x: np.ndarray):
    """Batched forward pass; x has shape [B, input_dim]. Returns (out, h1, h2)."""
    h1 = np.tanh(x @ params.a1.T + params.c1)
    h2 = np.tanh(h1 @ params.a2.T + params.c2)
    return h2 @ params.a3.T, h1, h2


def denoise_predict(
    params: DenoiserParams,
    z_t: np.ndarray,
    t: int,
    cond: np.ndarray,
    n_steps: int = N_STEPS,
) -> np.ndarray:
    """Single-sample noise prediction eps_hat(z_t, t, cond)."""
    z_t = np.asarray(z_t, dtype=np.float64).reshape(-1)
    cond = np.asarray(cond, dtype=np.float64).reshape(-1)
    x = np.concatenate([z_t, time_embedding(t, n_steps), cond])
    if x.shape[0] != params.input_dim:
        raise DomainError(f"denoiser input dim {x.shape[0]} != expected {params.input_dim}")
    out, _, _ = denoiser_forward(params, x[None, :])
    return out[0]


@dataclass
class TrainableSelection:
    """Which parameter groups receive gradients."""

    denoiser: bool = False
    text: bool = False
    rows: tuple[int, ...] = ()


@dataclass
class GradientSet:
    """Gradient buffers mirroring the trainable parameters."""

    denoiser: Optional[dict[str, np.ndarray]] = None
    text: Optional[dict[str, np.ndarray]] = None
    rows: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(
        cls,
        select: TrainableSelection,
        denoiser: DenoiserParams,
        text: TextEncoderParams,
        table: EmbeddingTable,
    ) -> "GradientSet":
        return cls(
            denoiser={k: np.zeros_like(v) for k, v in denoiser.tensors().items()}
            if select.denoiser
            else None,
            text={k: np.zeros_like(v) for k, v in text.tensors().items()}
            if select.text
            else None,
            rows={r: np.zeros(table.dim) for r in select.rows},
        )


@dataclass
class LossBatchItem:
    z0: np.ndarray
    ids: list[int]
    t: int
    eps: np.ndarray


def ldm_loss_and_grads(
    batch: Sequence[LossBatchItem],
    denoiser: DenoiserParams,
    text: TextEncoderParams,
    table: EmbeddingTable,
    sched: NoiseSchedule,
    select: TrainableSelection,
) -> tuple[float, GradientSet]:
    """Denoising loss mean_b ||eps - eps_hat(z_t, t, c(y))||^2 with gradients
    populated only for the selected parameter groups."""
    if len(batch) == 0:
        raise DomainError("empty batch")
    b = len(batch)
    latent_dim = denoiser.latent_dim

    conds, caches = [], []
    for item in batch:
        cond, cache = encode_text_cached(text, table, item.ids)
        conds.append(cond)
        caches.append(cache)

    z_t = np.stack([forward_noise(it.z0, it.t, it.eps, sched) for it in batch])
    temb = time_embedding(np.array([it.t for it in batch]), sched.n)
    x = np.hstack([z_t, temb, np.stack(conds)])
    out, h1, h2 = denoiser_forward(denoiser, x)

    eps = np.stack([it.eps for it in batch])
    residual = out - eps
    loss = float(np.mean(np.sum(residual**2, axis=1)))
    if not np.isfinite(loss):
        raise NumericsError(f"non-finite LDM loss on a batch of {b} (max |out| = {np.abs(out).max()})")

    grads = GradientSet.zeros(select, denoiser, text, table)
    need_text_path = select.text or bool(select.rows)
    if not (select.denoiser or need_text_path):
        return loss, grads

    d_out = 2.0 * residual / b
    d_h2 = d_out @ denoiser.a3
    d_u2 = d_h2 * (1.0 - h2**2)
    d_h1 = d_u2 @ denoiser.a2
    d_u1 = d_h1 * (1.0 - h1**2)

    if select.denoiser:
        grads.denoiser["a3"][:] = d_out.T @ h2
        grads.denoiser["a2"][:] = d_u2.T @ h1
        grads.denoiser["c2"][:] = d_u2.sum(axis=0)
        grads.denoiser["a1"][:] = d_u1.T @ x
        grads.denoiser["c1"][:] = d_u1.sum(axis=0)

    if need_text_path:
        d_x = d_u1 @ denoiser.a1
        cond_start = latent_dim + temb.shape[1]
        for i, cache in enumerate(caches):
            backprop_text(
                text,
                cache,
                d_x[i, cond_start:],
                grads.text if select.text else None,
                grads.rows if select.rows else None,
            )
    return loss, grads


def reverse_step(
    z: np.ndarray,
    n: int,
    eps_hat: np.ndarray,
    sched: NoiseSchedule,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One DDPM ancestral update from step n to n-1 (sigma_n = sqrt(beta_n))."""
    beta = sched.beta[n - 1]
    ab = sched.alpha_bar[n]
    mean = (z - beta / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(1.0 - beta)
    if n > 1 and noise is not None:
        return mean + np.sqrt(beta) * noise
    return mean


def ancestral_sample(
    denoise_fn: Callable[[np.ndarray, int], np.ndarray],
    sched: NoiseSchedule,
    dim: int,
    rng: np.random.Generator,
    deterministic: bool = False,
    init: Optional[np.ndarray] = None,
    start_step: Optional[int] = None,
) -> np.ndarray:
    """Run the reverse chain from `start_step` (default N) down to step 1.

    `init` is the starting latent (a pure Gaussian draw when omitted);
    `deterministic=True` zeroes every sigma.
    """
    start = sched.n if start_step is None else start_step
    if not 0 <= start <= sched.n:
        raise DomainError(f"start_step {start} outside 0..{sched.n}")
    z = rng.standard_normal(dim) if init is None else np.asarray(init, dtype=np.float64).copy()
    for n in range(start, 0, -1):
        eps_hat = denoise_fn(z, n)
        noise = None if (deterministic or n == 1) else rng.standard_normal(dim)
        z = reverse_step(z, n, eps_hat, sched, noise)
    return z
