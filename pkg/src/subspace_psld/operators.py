"""Linear measurement operators ``y = A x + sigma_y n``.

Every operator acts on flattened images (row-major, length ``d``) and accepts
either a single vector or a batch with samples along the leading axis.  The
adjoint is implemented matrix-free; :meth:`MeasurementOperator.as_matrix`
materialises ``A`` for small problems.

Selection kinds (inpainting, destriping, nearest-neighbour downsampling)
keep a subset of pixels, so ``A^T A`` is the diagonal 0/1 mask ``D(m)``.
Blur kinds use direct 2-D convolution with zero padding and "same" output
size; pixels near the border are attenuated because the kernel mass that
falls outside the image is lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionError
from .linmodel import SubspaceModel

SELECTION_KINDS = ("random_inpaint", "box_inpaint", "destripe", "identity")
KINDS = ("random_inpaint", "box_inpaint", "super_resolution", "gaussian_blur",
         "motion_blur", "destripe", "identity")


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """A linear map ``A: R^d -> R^rows`` with noise level ``sigma_y``.

    Construct through the ``make_*`` factories rather than directly.
    """

    kind: str
    cols: int
    rows: int
    shape: tuple[int, int] | None = None
    sigma_y: float = 0.0
    params: dict[str, Any] = field(default_factory=dict)
    keep: np.ndarray | None = field(default=None, repr=False)
    kernel: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.cols

    @property
    def is_selection(self) -> bool:
        return self.keep is not None

    @property
    def mask(self) -> np.ndarray | None:
        """0/1 vector ``m`` with ``A^T A = D(m)``; ``None`` for non-selection kinds."""
        if self.keep is None:
            return None
        m = np.zeros(self.cols)
        m[self.keep] = 1.0
        return m

    def _check(self, x, n):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != n:
            raise DimensionError(f"{self.kind}: expected trailing dimension {n}, got {x.shape}")
        return x

    def _as_images(self, x):
        h, w = self.shape
        return x.reshape(x.shape[:-1] + (h, w))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x, self.cols)
        if self.keep is not None:
            return x[..., self.keep]
        if self.kind == "super_resolution":
            s = self.params["scale"]
            h, w = self.shape
            img = x.reshape(x.shape[:-1] + (h // s, s, w // s, s))
            return img.mean(axis=(-3, -1)).reshape(x.shape[:-1] + (self.rows,))
        if self.kernel is not None:
            img = self._as_images(x)
            k = self.kernel.reshape((1,) * (img.ndim - 2) + self.kernel.shape)
            return ndimage.convolve(img, k, mode="constant", cval=0.0).reshape(x.shape)
        raise AssertionError(f"unhandled operator kind {self.kind}")

    def apply_transpose(self, u: np.ndarray) -> np.ndarray:
        u = self._check(u, self.rows)
        if self.keep is not None:
            out = np.zeros(u.shape[:-1] + (self.cols,))
            out[..., self.keep] = u
            return out
        if self.kind == "super_resolution":
            s = self.params["scale"]
            h, w = self.shape
            low = u.reshape(u.shape[:-1] + (h // s, 1, w // s, 1)) / (s * s)
            up = np.broadcast_to(low, u.shape[:-1] + (h // s, s, w // s, s))
            return up.reshape(u.shape[:-1] + (self.cols,)).copy()
        img = self._as_images(u)
        k = self.kernel.reshape((1,) * (img.ndim - 2) + self.kernel.shape)
        # adjoint of a centred odd-size convolution is correlation with the same kernel
        return ndimage.correlate(img, k, mode="constant", cval=0.0).reshape(u.shape)

    __call__ = apply
    rmatvec = apply_transpose

    def normal(self, x: np.ndarray) -> np.ndarray:
        """``A^T A x``."""
        return self.apply_transpose(self.apply(x))

    def as_matrix(self) -> np.ndarray:
        """Dense ``rows x cols`` matrix, built column by column."""
        return self.apply(np.eye(self.cols)).T

    def aslinearoperator(self) -> LinearOperator:
        return LinearOperator((self.rows, self.cols), matvec=self.apply,
                              rmatvec=self.apply_transpose, dtype=float)

    def times_basis(self, S: np.ndarray) -> np.ndarray:
        """``A @ S`` for a ``d x l`` matrix ``S``."""
        return self.apply(np.asarray(S).T).T

    def with_noise(self, sigma_y: float) -> "MeasurementOperator":
        if sigma_y < 0:
            raise ValueError("sigma_y must be nonnegative")
        return MeasurementOperator(self.kind, self.cols, self.rows, self.shape, float(sigma_y),
                                   dict(self.params), self.keep, self.kernel)

    def to_dict(self) -> dict[str, Any]:
        """Serialisable spec that :func:`operator_from_dict` rebuilds exactly."""
        spec = {"kind": self.kind, "sigma_y": self.sigma_y}
        if self.shape is not None:
            spec["height"], spec["width"] = self.shape
        else:
            spec["d"] = self.cols
        spec.update(self.params)
        return spec


def _selection(kind, keep_mask, shape, params):
    keep = np.flatnonzero(keep_mask)
    if keep.size == 0:
        raise ValueError(f"{kind}: every pixel is masked, nothing is measured")
    keep.setflags(write=False)
    return MeasurementOperator(kind, keep_mask.size, keep.size, shape, 0.0, params, keep=keep)


def make_identity(d: int, shape: tuple[int, int] | None = None) -> MeasurementOperator:
    return _selection("identity", np.ones(d, dtype=bool), shape, {})


def make_random_inpaint(d: int, drop_prob: float | str = 0.5, seed: int = 0,
                        shape: tuple[int, int] | None = None) -> MeasurementOperator:
    """Drop each pixel independently with probability ``drop_prob``.

    ``drop_prob="uniform"`` first draws the probability from U(0.2, 0.8).
    """
    rng = np.random.default_rng(seed)
    if drop_prob == "uniform":
        p = float(rng.uniform(0.2, 0.8))
    else:
        p = float(drop_prob)
        if not 0.0 < p < 1.0:
            raise ValueError("drop_prob must lie in (0, 1)")
    if shape is not None and shape[0] * shape[1] != d:
        raise DimensionError(f"shape {shape} does not match d={d}")
    keep = rng.random(d) >= p
    return _selection("random_inpaint", keep, shape,
                      {"drop_prob": drop_prob, "seed": seed, "drawn_drop_prob": p})


def centered_box(height: int, width: int) -> tuple[int, int, int, int]:
    """Half-side box in the middle of the image, as ``(top, left, h, w)``."""
    bh, bw = height // 2, width // 2
    return (height - bh) // 2, (width - bw) // 2, bh, bw


def make_box_inpaint(height: int, width: int,
                     box: tuple[int, int, int, int] | None = None) -> MeasurementOperator:
    """Mask the rectangle ``box = (top, left, box_height, box_width)``."""
    box = centered_box(height, width) if box is None else tuple(int(b) for b in box)
    top, left, bh, bw = box
    if min(box) < 0 or top + bh > height or left + bw > width:
        raise ValueError(f"box {box} exceeds image bounds {height}x{width}")
    keep = np.ones((height, width), dtype=bool)
    keep[top:top + bh, left:left + bw] = False
    return _selection("box_inpaint", keep.ravel(), (height, width), {"box": list(box)})


def make_destripe(height: int, width: int, orientation: str = "vertical",
                  stripe_indices=()) -> MeasurementOperator:
    """Mask entire rows (``horizontal``) or columns (``vertical``)."""
    idx = sorted({int(i) for i in stripe_indices})
    limit = {"horizontal": height, "vertical": width}.get(orientation)
    if limit is None:
        raise ValueError("orientation must be 'horizontal' or 'vertical'")
    if any(i < 0 or i >= limit for i in idx):
        raise ValueError(f"stripe index out of range 0..{limit - 1}")
    lines = np.ones(limit, dtype=bool)
    lines[idx] = False
    if orientation == "horizontal":
        keep = np.outer(lines, np.ones(width, dtype=bool))
    else:
        keep = np.outer(np.ones(height, dtype=bool), lines)
    return _selection("destripe", keep.ravel(), (height, width),
                      {"orientation": orientation, "stripe_indices": idx})


def make_super_resolution(height: int, width: int, scale: int = 2,
                          method: str = "average") -> MeasurementOperator:
    """Downsample by ``scale``: block averaging, or top-left pixel with ``method="nearest"``."""
    scale = int(scale)
    if scale < 2 or height % scale or width % scale:
        raise ValueError(f"scale {scale} must be >= 2 and divide {height}x{width}")
    params = {"scale": scale, "method": method}
    if method == "nearest":
        keep = np.zeros((height, width), dtype=bool)
        keep[::scale, ::scale] = True
        op = _selection("super_resolution", keep.ravel(), (height, width), params)
        return op
    if method != "average":
        raise ValueError("method must be 'average' or 'nearest'")
    d = height * width
    return MeasurementOperator("super_resolution", d, d // scale ** 2, (height, width), 0.0, params)


def _convolution(kind, height, width, kernel, params):
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError("kernel must be 2-D with odd side lengths")
    if kernel.shape[0] > height or kernel.shape[1] > width:
        raise ValueError("kernel does not fit inside the image")
    total = kernel.sum()
    if not np.any(kernel) or total == 0:
        raise ValueError("degenerate (all-zero) kernel")
    kernel = kernel / total
    kernel.setflags(write=False)
    d = height * width
    return MeasurementOperator(kind, d, d, (height, width), 0.0, params, kernel=kernel)


def gaussian_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = np.arange(kernel_size) - (kernel_size - 1) / 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def motion_kernel(length: int, angle: float) -> np.ndarray:
    """Normalised line segment of ``length`` pixels at ``angle`` degrees, nearest-pixel rasterised."""
    if length < 1:
        raise ValueError("length must be >= 1")
    size = length if length % 2 else length + 1
    c = (size - 1) / 2
    t = np.linspace(-(length - 1) / 2, (length - 1) / 2, 4 * length + 1)
    theta = np.deg2rad(angle)
    rows = np.clip(np.rint(c - t * np.sin(theta)).astype(int), 0, size - 1)
    cols = np.clip(np.rint(c + t * np.cos(theta)).astype(int), 0, size - 1)
    k = np.zeros((size, size))
    k[rows, cols] = 1.0
    return k / k.sum()


def make_gaussian_blur(height: int, width: int, kernel_size: int = 3,
                       sigma: float = 1.0) -> MeasurementOperator:
    return _convolution("gaussian_blur", height, width, gaussian_kernel(kernel_size, sigma),
                        {"kernel_size": int(kernel_size), "sigma": float(sigma)})


def make_motion_blur(height: int, width: int, length: int = 3,
                     angle: float = 0.0) -> MeasurementOperator:
    return _convolution("motion_blur", height, width, motion_kernel(length, angle),
                        {"length": int(length), "angle": float(angle)})


def make_convolution(height: int, width: int, kernel: np.ndarray,
                     kind: str = "gaussian_blur") -> MeasurementOperator:
    """Blur operator with an explicit kernel (normalised to sum 1)."""
    return _convolution(kind, height, width, kernel, {})


def operator_from_dict(spec: dict[str, Any]) -> MeasurementOperator:
    """Inverse of :meth:`MeasurementOperator.to_dict`."""
    spec = dict(spec)
    kind = spec.pop("kind")
    sigma_y = float(spec.pop("sigma_y", 0.0))
    h, w = spec.pop("height", None), spec.pop("width", None)
    shape = (int(h), int(w)) if h is not None else None
    d = int(spec.pop("d")) if "d" in spec else (shape[0] * shape[1] if shape else None)
    spec.pop("drawn_drop_prob", None)
    if kind == "identity":
        op = make_identity(d, shape)
    elif kind == "random_inpaint":
        op = make_random_inpaint(d, spec.get("drop_prob", 0.5), spec.get("seed", 0), shape=shape)
    elif kind == "box_inpaint":
        op = make_box_inpaint(*shape, box=spec.get("box"))
    elif kind == "destripe":
        op = make_destripe(*shape, spec.get("orientation", "vertical"), spec.get("stripe_indices", ()))
    elif kind == "super_resolution":
        op = make_super_resolution(*shape, spec.get("scale", 2), spec.get("method", "average"))
    elif kind == "gaussian_blur":
        op = make_gaussian_blur(*shape, spec.get("kernel_size", 3), spec.get("sigma", 1.0))
    elif kind == "motion_blur":
        op = make_motion_blur(*shape, spec.get("length", 3), spec.get("angle", 0.0))
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    return op.with_noise(sigma_y)


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    operator: MeasurementOperator
    noise_seed: int | None


def measure(op: MeasurementOperator, x0: np.ndarray, noise_seed: int | None = 0) -> Measurement:
    """``y = A x0 + sigma_y n`` with ``n`` drawn from ``noise_seed``."""
    y = op.apply(x0)
    if op.sigma_y > 0:
        y = y + op.sigma_y * np.random.default_rng(noise_seed).standard_normal(y.shape)
    return Measurement(y, op, noise_seed)


@dataclass(frozen=True)
class Assumption2Check:
    """Eigendecomposition ``(AS)^T (AS) = U diag(sigma) U^T``, sigma descending."""

    holds: bool
    min_eig: float
    U: np.ndarray
    sigma: np.ndarray

    @property
    def svd(self):
        return self.U, self.sigma


def check_assumption2(op: MeasurementOperator, model: SubspaceModel,
                      tol: float = 1e-10) -> Assumption2Check:
    """Test whether ``(AS)^T (AS)`` is positive definite."""
    if op.cols != model.d:
        raise DimensionError(f"operator acts on {op.cols} pixels, model has d={model.d}")
    AS = op.times_basis(model.S)
    M = AS.T @ AS
    evals, evecs = np.linalg.eigh((M + M.T) / 2)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    min_eig = float(evals[-1])
    return Assumption2Check(min_eig > tol, min_eig, evecs, np.clip(evals, 0.0, None))
