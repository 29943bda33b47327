"""Guidance objectives and their analytic gradients.

Each objective is a function of the current iterate ``v`` (pixel vector or
latent) through the denoised estimate ``est = scale * P v``, where ``P`` is
the subspace projector (pixel space) or the identity (latent space).  In the
exact two-step regime ``scale = 1`` (the normalised closed-form denoiser);
in the multi-step samplers ``scale = sqrt(abar_i)``, the analytic posterior
mean.  Gradients are taken with respect to ``v`` through ``est``.
"""

from __future__ import annotations

import numpy as np

from .linmodel import LinearVae, SubspaceModel
from .operators import MeasurementOperator


class PixelMeasurement:
    """``||y - A(scale S S^T x)||^2``."""

    def __init__(self, model: SubspaceModel, op: MeasurementOperator, y: np.ndarray,
                 scale: float = 1.0):
        self.model, self.op, self.y, self.scale = model, op, np.asarray(y, dtype=float), scale

    def estimate(self, x):
        return self.scale * self.model.project(x)

    def residual(self, x):
        return self.op.apply(self.estimate(x)) - self.y

    def value(self, x) -> float:
        r = self.residual(x)
        return float(r @ r)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.scale * self.model.project(self.op.apply_transpose(self.residual(x)))


class LatentMeasurement:
    """``||y - A D(scale z)||^2``."""

    def __init__(self, vae: LinearVae, op: MeasurementOperator, y: np.ndarray, scale: float = 1.0):
        self.vae, self.op, self.y, self.scale = vae, op, np.asarray(y, dtype=float), scale

    def residual(self, z):
        return self.op.apply(self.vae.decode(self.scale * z)) - self.y

    def value(self, z) -> float:
        r = self.residual(z)
        return float(r @ r)

    def gradient(self, z) -> np.ndarray:
        back = self.op.apply_transpose(self.residual(z)) @ self.vae.decoder
        return 2.0 * self.scale * back


class Goodness:
    """``||est - E(D(est))||^2`` with ``est = scale z``."""

    def __init__(self, vae: LinearVae, scale: float = 1.0):
        self.vae, self.scale = vae, scale

    def _residual_of(self, u):
        return u - self.vae.encode(self.vae.decode(u))

    def residual(self, z):
        return self._residual_of(self.scale * z)

    def value(self, z) -> float:
        r = self.residual(z)
        return float(r @ r)

    def gradient(self, z) -> np.ndarray:
        r = self.residual(z)
        # (I - E D)^T r
        back = r - (r @ self.vae.encoder) @ self.vae.decoder
        return 2.0 * self.scale * back


class Gluing:
    """``||est - E(A^T y + (I - A^T A) D(est))||^2`` with ``est = scale z``.

    ``A^T y`` stands in for ``A^T A x0*``; the two coincide for noiseless
    measurements of any linear operator.
    """

    def __init__(self, vae: LinearVae, op: MeasurementOperator, y: np.ndarray, scale: float = 1.0):
        self.vae, self.op, self.scale = vae, op, scale
        self.anchor = vae.encode(op.apply_transpose(np.asarray(y, dtype=float)))

    def _G(self, u):
        # (I - E (I - A^T A) D) u
        x = self.vae.decode(u)
        return u - self.vae.encode(x - self.op.normal(x))

    def _G_T(self, r):
        x = r @ self.vae.encoder
        return r - (x - self.op.normal(x)) @ self.vae.decoder

    def residual(self, z):
        return self._G(self.scale * z) - self.anchor

    def value(self, z) -> float:
        r = self.residual(z)
        return float(r @ r)

    def gradient(self, z) -> np.ndarray:
        return 2.0 * self.scale * self._G_T(self.residual(z))

    def system(self):
        """Dense ``(G, b)`` such that the minimiser over ``u`` solves ``G u = b``."""
        G = self._G(np.eye(self.vae.k)).T
        return G, self.anchor


def central_difference(f, v: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``v``."""
    v = np.asarray(v, dtype=float)
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        g[i] = (f(v + e) - f(v - e)) / (2 * h)
    return g
