"""Noise schedules, the forward kernel and analytic denoisers.

Posterior means
---------------
Under the forward marginal ``z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps``
with prior ``z0 ~ N(0, v I)``, Gaussian conditioning gives::

    E[z0 | z_t] = sqrt(abar_t) v / (abar_t v + 1 - abar_t) * z_t

The analytic VAE pushes the data onto ``N(0, I_k)``, so ``v = 1`` and the
denominator is one: ``E[z0 | z_t] = sqrt(abar_t) z_t``.  In pixel space the
prior ``x0 = S w`` has covariance ``S S^T``; on ``range(S)`` the same
computation applies and the orthogonal complement carries no signal, hence
``E[x0 | x_t] = sqrt(abar_t) S S^T x_t``.  These closed forms play the role
of a perfectly trained denoising network in the multi-step samplers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RankDeficiencyError
from .linmodel import SubspaceModel, sample_signals


@dataclass(frozen=True)
class DiffusionSchedule:
    """Variance schedule ``beta_1..beta_T``; step ``i`` is 1-based throughout."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty 1-D sequence")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ValueError("every beta must lie in (0, 1)")
        if np.any(np.diff(beta) < 0):
            raise ValueError("beta must be nondecreasing")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def linear(cls, T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> "DiffusionSchedule":
        if T < 1:
            raise ValueError("T must be >= 1")
        return cls(np.linspace(beta_start, beta_end, T))

    @classmethod
    def two_step(cls, beta: float) -> "DiffusionSchedule":
        return cls(np.array([beta]))

    @property
    def T(self) -> int:
        return self.beta.size

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    @property
    def alpha_bar_prev(self) -> np.ndarray:
        """``abar_{i-1}`` for ``i = 1..T`` with ``abar_0 = 1``."""
        return np.concatenate([[1.0], self.alpha_bar[:-1]])

    @property
    def sigma_tilde(self) -> np.ndarray:
        st = np.sqrt(self.beta * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar))
        st[0] = 0.0
        return st

    def coefficients(self, t: int):
        """``(alpha_bar, alpha_bar_prev, alpha, beta, sigma_tilde)`` at step ``t``."""
        self._check_step(t)
        i = t - 1
        return (self.alpha_bar[i], self.alpha_bar_prev[i], self.alpha[i],
                self.beta[i], self.sigma_tilde[i])

    def _check_step(self, t: int):
        if not 1 <= t <= self.T:
            raise IndexError(f"step {t} outside 1..{self.T}")


def forward_step(x: np.ndarray, beta: float, rng: np.random.Generator) -> np.ndarray:
    """One forward noising step ``sqrt(1 - beta) x + sqrt(beta) eps``."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 - beta) * x + np.sqrt(beta) * rng.standard_normal(x.shape)


@dataclass(frozen=True)
class TwoStepDenoiser:
    """Linear denoiser ``mu(x1) = theta @ x1`` for the two-step diffusion."""

    theta: np.ndarray
    space: str
    beta: float

    @property
    def normalized(self) -> np.ndarray:
        """``theta / sqrt(1 - beta)``: the projector ``S S^T`` or ``I_k``."""
        return self.theta / np.sqrt(1.0 - self.beta)

    def __call__(self, x1: np.ndarray) -> np.ndarray:
        return self.theta @ x1


def _check_space(space: str):
    if space not in ("pixel", "latent"):
        raise ValueError(f"space must be 'pixel' or 'latent', got {space!r}")


def closed_form_theta(model: SubspaceModel, beta: float, space: str = "pixel") -> TwoStepDenoiser:
    """Least-squares optimal two-step denoiser: ``sqrt(1-b) S S^T`` or ``sqrt(1-b) I_l``."""
    _check_space(space)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    base = model.projector() if space == "pixel" else np.eye(model.l)
    return TwoStepDenoiser(np.sqrt(1.0 - beta) * base, space, float(beta))


def regression_fit_theta(model: SubspaceModel, beta: float, space: str, n_samples: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Fit ``theta`` by empirical least squares ``min sum ||x0 - theta x1||^2``.

    Signals and one-step noisy versions are drawn from the model; the
    regression is solved through its normal equations.
    """
    _check_space(space)
    w0, x0 = sample_signals(model, n_samples, rng)
    target = x0 if space == "pixel" else w0
    noisy = forward_step(target, beta, rng)
    gram = noisy.T @ noisy
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise RankDeficiencyError(
            f"normal equations are singular with n_samples={n_samples} for dimension {gram.shape[0]}")
    cross = noisy.T @ target
    # gram @ theta^T = cross
    return np.linalg.solve(gram, cross).T


def posterior_mean_latent(z_t: np.ndarray, alpha_bar: float, prior_var: float = 1.0) -> np.ndarray:
    """``E[z0 | z_t]`` for ``z0 ~ N(0, prior_var I)``."""
    if not 0.0 <= alpha_bar <= 1.0:
        raise ValueError("alpha_bar must lie in [0, 1]")
    scale = np.sqrt(alpha_bar) * prior_var / (alpha_bar * prior_var + 1.0 - alpha_bar)
    return scale * np.asarray(z_t, dtype=float)


def posterior_mean_z0(schedule: DiffusionSchedule, z_t: np.ndarray, t: int) -> np.ndarray:
    """Analytic ``E[z0 | z_t]`` at step ``t`` under the unit-variance latent prior."""
    schedule._check_step(t)
    return posterior_mean_latent(z_t, schedule.alpha_bar[t - 1])


def posterior_mean_x0(model: SubspaceModel, schedule: DiffusionSchedule, x_t: np.ndarray,
                      t: int) -> np.ndarray:
    """Analytic ``E[x0 | x_t] = sqrt(abar_t) S S^T x_t``."""
    schedule._check_step(t)
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape[-1] != model.d:
        raise DimensionError(f"expected dimension {model.d}, got {x_t.shape}")
    return np.sqrt(schedule.alpha_bar[t - 1]) * model.project(x_t)


def analytic_score(x_t: np.ndarray, posterior_mean: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Tweedie score ``(sqrt(abar) E[x0|x_t] - x_t) / (1 - abar)``."""
    return (np.sqrt(alpha_bar) * posterior_mean - x_t) / (1.0 - alpha_bar)
