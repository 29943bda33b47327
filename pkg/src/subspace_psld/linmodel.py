"""Linear-subspace data model and its analytic linear autoencoder.

Clean signals are ``x0 = S @ w0`` with ``w0 ~ N(0, I_l)`` and ``S`` a ``d x l``
matrix with orthonormal columns.  For this model the encoder ``x -> S^T x``
and decoder ``z -> S z`` reconstruct every signal exactly and push the data
distribution forward onto ``N(0, I_l)``, so they minimise the usual VAE
objective for any KL weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class SubspaceModel:
    """Generating matrix ``S`` (``d x l``, orthonormal columns)."""

    S: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[1] > S.shape[0] or S.shape[1] == 0:
            raise DimensionError(f"S must be d x l with 1 <= l <= d, got {S.shape}")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @property
    def d(self) -> int:
        return self.S.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.S.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector ``S S^T`` onto the signal subspace."""
        return self.S @ self.S.T

    def project(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) @ self.S) @ self.S.T


def make_subspace_model(d: int, l: int, seed: int = 0) -> SubspaceModel:  # noqa: E741
    """Orthonormal ``S`` from the reduced QR factor of a seeded Gaussian matrix."""
    if l < 1 or d < 1 or l > d:
        raise DimensionError(f"need 1 <= l <= d, got d={d}, l={l}")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, l)), mode="reduced")
    return SubspaceModel(q, seed=seed)


def sample_signal(model: SubspaceModel, rng: np.random.Generator):
    """Draw ``w0 ~ N(0, I_l)`` and return ``(w0, S @ w0)``."""
    w0 = rng.standard_normal(model.l)
    return w0, model.S @ w0


def sample_signals(model: SubspaceModel, n: int, rng: np.random.Generator):
    """Batched version of :func:`sample_signal`; rows are samples."""
    w = rng.standard_normal((n, model.l))
    return w, w @ model.S.T


@dataclass(frozen=True)
class LinearVae:
    """Autoencoder with linear encoder ``E`` (``k x d``) and decoder ``D`` (``d x k``).

    Encode/decode accept a single vector or a batch with samples along the
    first axis.
    """

    encoder: np.ndarray
    decoder: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.encoder, dtype=float)
        D = np.asarray(self.decoder, dtype=float)
        if E.ndim != 2 or D.ndim != 2 or E.shape != D.T.shape:
            raise DimensionError(f"encoder {E.shape} and decoder {D.shape} do not pair up")
        object.__setattr__(self, "encoder", E)
        object.__setattr__(self, "decoder", D)

    @property
    def d(self) -> int:
        return self.decoder.shape[0]

    @property
    def k(self) -> int:
        return self.decoder.shape[1]

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise DimensionError(f"expected trailing dimension {self.d}, got {x.shape}")
        return x @ self.encoder.T

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.k:
            raise DimensionError(f"expected trailing dimension {self.k}, got {z.shape}")
        return z @ self.decoder.T


@dataclass(frozen=True)
class AnalyticVae(LinearVae):
    """The optimal VAE for a :class:`SubspaceModel`: ``E = S^T``, ``D = S`` (k = l)."""

    model: SubspaceModel = field(default=None, repr=False)

    @classmethod
    def from_model(cls, model: SubspaceModel) -> "AnalyticVae":
        return cls(encoder=model.S.T, decoder=model.S, model=model)


def vae_encode(vae: LinearVae, x: np.ndarray) -> np.ndarray:
    return vae.encode(x)


def vae_decode(vae: LinearVae, z: np.ndarray) -> np.ndarray:
    return vae.decode(z)


def vae_empirical_losses(vae: LinearVae, n_samples: int, rng: np.random.Generator,
                         model: SubspaceModel | None = None, signals: np.ndarray | None = None):
    """Monte Carlo estimate of the two VAE loss terms.

    Returns ``(recon_loss, latent_moment_gap)``: the mean squared
    reconstruction error and ``max(|mean(z)|_inf, |cov(z) - I|_max)`` over the
    encoded samples, the latter standing in for the KL term.  Pass
    ``signals`` to evaluate on fixed data instead of fresh model draws.
    """
    if signals is None:
        if n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        model = model if model is not None else getattr(vae, "model", None)
        if model is None:
            raise ValueError("a SubspaceModel is required to draw signals")
        _, signals = sample_signals(model, n_samples, rng)
    x = np.atleast_2d(np.asarray(signals, dtype=float))
    z = vae.encode(x)
    recon = float(np.mean(np.sum((vae.decode(z) - x) ** 2, axis=1)))
    mean_gap = float(np.max(np.abs(z.mean(axis=0))))
    cov_gap = float(np.max(np.abs(np.cov(z, rowvar=False).reshape(vae.k, vae.k) - np.eye(vae.k))))
    return recon, max(mean_gap, cov_gap)
