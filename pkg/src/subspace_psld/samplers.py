"""Posterior samplers: DPS, GML-DPS and PSLD.

Two regimes are provided.

``*_two_step``
    The exact linear regime: a single reverse step from ``x1`` (or ``z1``)
    using the closed-form denoiser normalised by ``1/sqrt(1 - beta)``,
    followed by the guidance update(s).  Under orthonormal ``S`` and
    positive definite ``(AS)^T (AS)`` these recover ``x0`` exactly: DPS and
    GML-DPS with the preconditioning step built from the eigendecomposition
    of ``(AS)^T (AS)``, PSLD with any positive scalar step because its gluing
    problem is solved in closed form and its minimiser ignores the
    measurement step.

``*_multi_step``
    The ancestral DDPM loop with the analytic posterior mean in place of a
    trained network and one gradient step per guidance term per iteration.
    The samplers return the final guided iterate ``x_0`` (``D(z_0)`` for the
    latent samplers); with ``T = 1`` this is the two-step update with an
    unnormalised denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import DiffusionSchedule, analytic_score, closed_form_theta, posterior_mean_x0, \
    posterior_mean_z0
from .errors import AssumptionViolation, ConfigError, DimensionError
from .guidance import Gluing, Goodness, LatentMeasurement, PixelMeasurement
from .linmodel import LinearVae, SubspaceModel
from .operators import Assumption2Check, MeasurementOperator, check_assumption2

ALGORITHMS = ("DPS", "GML_DPS", "PSLD", "LATENT_DPS")
REGIMES = ("two_step_exact", "multi_step")


@dataclass(frozen=True)
class SamplerConfig:
    """Algorithm selector and step sizes.

    ``eta``/``zeta`` accept a positive scalar, a length-``T`` sequence, or
    the string ``"matrix"`` for the preconditioned step.
    """

    algorithm: str = "PSLD"
    regime: str = "two_step_exact"
    eta: float | str | tuple = 1.0
    gamma: float | tuple | None = None
    zeta: float | str | tuple = 1.0
    T: int = 100
    seed: int = 0
    noise: str = "latent"

    def __post_init__(self):
        if self.noise not in ("latent", "encoded"):
            raise ConfigError(f"unknown noise mode {self.noise!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        for name in ("eta", "zeta", "gamma"):
            v = getattr(self, name)
            if v is None or isinstance(v, str):
                if isinstance(v, str) and v != "matrix":
                    raise ConfigError(f"{name}: only 'matrix' is accepted as a string step")
                continue
            if np.any(np.asarray(v, dtype=float) <= 0):
                raise ConfigError(f"{name} must be positive")

    @property
    def gamma_value(self):
        if self.gamma is not None:
            return self.gamma
        return 1.0 if self.regime == "two_step_exact" else 0.1


@dataclass
class StepRecord:
    step: int
    iterate_norm: float
    measurement_residual: float
    gluing_residual: float | None = None
    goodness_residual: float | None = None


@dataclass
class SampleTrace:
    records: list[StepRecord] = field(default_factory=list)
    x0_hat: np.ndarray | None = None
    z0_hat: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


class MatrixStep:
    """Preconditioning step ``(1/2) B diag(1/sigma) B^T``, kept in factored form.

    ``B = S U`` for pixel-space DPS and ``B = U`` for latent samplers, where
    ``(AS)^T (AS) = U diag(sigma) U^T``.
    """

    def __init__(self, basis: np.ndarray, sigma: np.ndarray):
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise ConfigError("matrix step needs strictly positive eigenvalues")
        self.basis = np.asarray(basis, dtype=float)
        self.sigma = sigma

    @classmethod
    def for_pixels(cls, check: Assumption2Check, model: SubspaceModel) -> "MatrixStep":
        return cls(model.S @ check.U, check.sigma)

    @classmethod
    def for_latents(cls, check: Assumption2Check) -> "MatrixStep":
        return cls(check.U, check.sigma)

    def __call__(self, g: np.ndarray) -> np.ndarray:
        return 0.5 * self.basis @ ((self.basis.T @ g) / self.sigma)

    def dense(self) -> np.ndarray:
        if self.basis.shape[0] > 256:
            raise ValueError("refusing to materialise a matrix step above 256 x 256")
        return 0.5 * (self.basis / self.sigma) @ self.basis.T


def _step_operator(step, n: int):
    """Turn a step specification into a callable ``g -> step @ g``."""
    if isinstance(step, MatrixStep):
        if step.basis.shape[0] != n:
            raise DimensionError(f"matrix step acts on {step.basis.shape[0]}, iterate has {n}")
        return step
    arr = np.asarray(step, dtype=float)
    if arr.ndim == 0:
        if arr <= 0:
            raise ConfigError("step size must be positive")
        s = float(arr)
        return lambda g: s * g
    if arr.ndim == 1:
        if arr.size != n or np.any(arr <= 0):
            raise ConfigError(f"per-coordinate step must be {n} positive values")
        return lambda g: arr * g
    if arr.shape != (n, n):
        raise DimensionError(f"matrix step must be {n} x {n}, got {arr.shape}")
    if not np.allclose(arr, arr.T, atol=1e-12) or np.linalg.eigvalsh(arr).min() <= 0:
        raise ConfigError("matrix step must be symmetric positive definite")
    return lambda g: arr @ g


def _step_schedule(step, T: int, n: int):
    """Per-iteration step callables for steps ``i = 1..T`` (index ``i - 1``).

    Lists and tuples are per-iteration sequences; anything else (including a
    1-D array, read as per-coordinate steps) is reused at every iteration.
    """
    if isinstance(step, (list, tuple)):
        if len(step) != T:
            raise ConfigError(f"step sequence has length {len(step)}, expected T={T}")
        return [_step_operator(s, n) for s in step]
    op = _step_operator(step, n)
    return [op] * T


def _require_assumption(op, model, assumption):
    check = assumption if assumption is not None else check_assumption2(op, model)
    if not check.holds:
        raise AssumptionViolation(
            f"(AS)^T(AS) is not positive definite (min eigenvalue {check.min_eig:.3e})")
    return check


def _residual_norm(op, x, y):
    return float(np.linalg.norm(y - op.apply(x)))


def dps_two_step(model: SubspaceModel, op: MeasurementOperator, y: np.ndarray, step="matrix",
                 rng: np.random.Generator | None = None, *, beta: float = 0.5,
                 normalize: bool = True, assumption: Assumption2Check | None = None):
    """Pixel-space DPS over one reverse step.

    ``x0_hat = theta x1 - step @ grad ||A theta x1 - y||^2`` with
    ``x1 ~ N(0, I_d)``.  ``step="matrix"`` uses ``(1/2)(SU) diag(1/sigma)(SU)^T``,
    which makes the update land exactly on ``x0``.  ``normalize=False``
    keeps ``theta = sqrt(1 - beta) S S^T`` instead of the projector.
    """
    rng = np.random.default_rng() if rng is None else rng
    y = np.asarray(y, dtype=float)
    check = _require_assumption(op, model, assumption)
    if isinstance(step, str):
        step = MatrixStep.for_pixels(check, model)
    apply_step = _step_operator(step, model.d)
    theta = closed_form_theta(model, beta, "pixel")
    scale = 1.0 if normalize else float(np.sqrt(1.0 - theta.beta))

    x1 = rng.standard_normal(model.d)
    guide = PixelMeasurement(model, op, y, scale)
    x0_hat = guide.estimate(x1) - apply_step(guide.gradient(x1))
    trace = SampleTrace([StepRecord(1, float(np.linalg.norm(x0_hat)), _residual_norm(op, x0_hat, y))],
                        x0_hat=x0_hat)
    return x0_hat, trace


def _latent_first_step(vae, op, y, step, rng, check):
    if isinstance(step, str):
        step = MatrixStep.for_latents(check)
    apply_step = _step_operator(step, vae.k)
    z1 = rng.standard_normal(vae.k)
    guide = LatentMeasurement(vae, op, y, 1.0)
    # normalised closed-form latent denoiser is the identity
    return z1 - apply_step(guide.gradient(z1))


def gml_dps_two_step(model: SubspaceModel, vae: LinearVae, op: MeasurementOperator, y: np.ndarray,
                     step="matrix", rng: np.random.Generator | None = None, *, gamma: float = 1.0,
                     assumption: Assumption2Check | None = None):
    """Latent DPS with the goodness term ``||z - E(D(z))||^2``.

    The measurement step with ``step="matrix"`` (``(1/2) U diag(1/sigma) U^T``)
    lands on ``E(x0)``.  The goodness gradient then vanishes identically for
    the analytic VAE, so it cannot repair a badly chosen step.
    """
    rng = np.random.default_rng() if rng is None else rng
    y = np.asarray(y, dtype=float)
    check = _require_assumption(op, model, assumption)
    z_meas = _latent_first_step(vae, op, y, step, rng, check)
    good = Goodness(vae, 1.0)
    z0 = z_meas - gamma * good.gradient(z_meas)
    x0_hat = vae.decode(z0)
    rec = StepRecord(1, float(np.linalg.norm(z0)), _residual_norm(op, x0_hat, y),
                     goodness_residual=float(np.linalg.norm(good.residual(z_meas))))
    return x0_hat, SampleTrace([rec], x0_hat=x0_hat, z0_hat=z0)


def solve_gluing(vae: LinearVae, op: MeasurementOperator, y: np.ndarray) -> np.ndarray:
    """Closed-form minimiser of ``||z - E(A^T y + (I - A^T A) D(z))||^2``.

    For the analytic VAE the system matrix is ``(AS)^T (AS)``.
    """
    G, b = Gluing(vae, op, y).system()
    evals = np.linalg.svd(G, compute_uv=False)
    if evals[-1] <= 1e-10 * max(evals[0], 1.0):
        raise AssumptionViolation("gluing system is singular; (AS)^T(AS) is not positive definite")
    return np.linalg.solve(G, b)


def psld_two_step(model: SubspaceModel, vae: LinearVae, op: MeasurementOperator, y: np.ndarray,
                  eta=1.0, rng: np.random.Generator | None = None, *,
                  assumption: Assumption2Check | None = None):
    """PSLD over one reverse step: measurement step with any ``eta``, then exact gluing."""
    rng = np.random.default_rng() if rng is None else rng
    y = np.asarray(y, dtype=float)
    check = _require_assumption(op, model, assumption)
    z_meas = _latent_first_step(vae, op, y, eta, rng, check)
    z0 = solve_gluing(vae, op, y)
    x0_hat = vae.decode(z0)
    glue = Gluing(vae, op, y, 1.0)
    rec = StepRecord(1, float(np.linalg.norm(z0)), _residual_norm(op, x0_hat, y),
                     gluing_residual=float(np.linalg.norm(glue.residual(z0))),
                     goodness_residual=float(np.linalg.norm(Goodness(vae).residual(z_meas))))
    return x0_hat, SampleTrace([rec], x0_hat=x0_hat, z0_hat=z0)


def _ancestral_mean(x, x0_hat, alpha_bar, alpha_bar_prev, alpha, beta):
    c_x = np.sqrt(alpha) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    c_0 = np.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar)
    return c_x * x + c_0 * x0_hat


def dps_multi_step(model: SubspaceModel, schedule: DiffusionSchedule, op: MeasurementOperator,
                   y: np.ndarray, zeta=1.0, rng: np.random.Generator | None = None, *,
                   assumption: Assumption2Check | None = None):
    """Ancestral DPS loop in pixel space with the analytic score.

    Per step: ``x0_hat = (x + (1 - abar) s) / sqrt(abar)`` with the Tweedie
    score ``s``, an ancestral draw ``x'``, then
    ``x <- x' - zeta_i grad ||y - A x0_hat(x)||^2``.  Because
    ``x0_hat = sqrt(abar) S S^T x`` the gradient is
    ``2 sqrt(abar) S S^T A^T (A x0_hat - y)``.  ``zeta="matrix"`` uses the
    preconditioned step at every iteration.
    """
    rng = np.random.default_rng() if rng is None else rng
    y = np.asarray(y, dtype=float)
    T = schedule.T
    if isinstance(zeta, str):
        zeta = MatrixStep.for_pixels(_require_assumption(op, model, assumption), model)
    steps = _step_schedule(zeta, T, model.d)
    x = rng.standard_normal(model.d)
    trace = SampleTrace()
    for i in range(T, 0, -1):
        ab, abp, a, b, st = schedule.coefficients(i)
        mean = posterior_mean_x0(model, schedule, x, i)
        score = analytic_score(x, mean, ab)
        x0_hat = (x + (1.0 - ab) * score) / np.sqrt(ab)
        noise = rng.standard_normal(model.d)
        x_prev = _ancestral_mean(x, x0_hat, ab, abp, a, b) + st * noise
        guide = PixelMeasurement(model, op, y, np.sqrt(ab))
        x = x_prev - steps[i - 1](guide.gradient(x))
        trace.records.append(StepRecord(i, float(np.linalg.norm(x)), _residual_norm(op, x, y)))
    trace.x0_hat = x
    return x, trace


def glue_observations(op: MeasurementOperator, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``A^T y + (I - A^T A) x``: paste the observations over the generated image.

    Selection operators copy ``y`` into the observed pixels, so they match bit for bit.
    """
    if op.is_selection:
        out = np.array(x, dtype=float)
        out[..., op.keep] = y
        return out
    return x + op.apply_transpose(y) - op.normal(x)


def _latent_normals(vae, rng, noise):
    """Gaussian draws for the latent loop.

    ``noise="encoded"`` draws pixel-space normals and encodes them.  For an
    encoder with orthonormal rows these are exactly ``N(0, I_k)`` and consume
    the same random stream as the pixel-space sampler, which couples paired
    comparisons against :func:`dps_multi_step`.
    """
    if noise == "latent":
        return lambda: rng.standard_normal(vae.k)
    if noise != "encoded":
        raise ConfigError("noise must be 'latent' or 'encoded'")
    E = vae.encoder
    if not np.allclose(E @ E.T, np.eye(vae.k), atol=1e-10):
        raise ConfigError("encoded noise requires an encoder with orthonormal rows")
    return lambda: vae.encode(rng.standard_normal(vae.d))


def _latent_multi_step(model, vae, schedule, op, y, eta, gamma, rng, regularizer,
                       gluing="gradient", post_process=True, assumption=None, noise="latent"):
    rng = np.random.default_rng() if rng is None else rng
    draw = _latent_normals(vae, rng, noise)
    y = np.asarray(y, dtype=float)
    T = schedule.T
    if isinstance(eta, str):
        eta = MatrixStep.for_latents(_require_assumption(op, model, assumption))
    etas = _step_schedule(eta, T, vae.k)
    gammas = np.broadcast_to(np.asarray(gamma, dtype=float), (T,))
    if np.any(gammas < 0):
        raise ConfigError("gamma must be nonnegative")
    z_glued = solve_gluing(vae, op, y) if gluing == "closed_form" else None
    z = draw()
    trace = SampleTrace()
    for i in range(T, 0, -1):
        ab, abp, a, b, st = schedule.coefficients(i)
        mean = posterior_mean_z0(schedule, z, i)
        score = analytic_score(z, mean, ab)
        z0_hat = (z + (1.0 - ab) * score) / np.sqrt(ab)
        z_prev = _ancestral_mean(z, z0_hat, ab, abp, a, b) + st * draw()
        scale = np.sqrt(ab)
        z_prev = z_prev - etas[i - 1](LatentMeasurement(vae, op, y, scale).gradient(z))
        good = Goodness(vae, scale)
        glue = Gluing(vae, op, y, scale)
        if regularizer == "goodness":
            z_prev = z_prev - gammas[i - 1] * good.gradient(z)
        elif regularizer == "gluing":
            if z_glued is not None:
                z_prev = z_glued.copy()
            else:
                z_prev = z_prev - gammas[i - 1] * glue.gradient(z)
        rec = StepRecord(i, float(np.linalg.norm(z_prev)), 0.0,
                         gluing_residual=float(np.linalg.norm(glue.residual(z))),
                         goodness_residual=float(np.linalg.norm(good.residual(z))))
        z = z_prev
        rec.measurement_residual = _residual_norm(op, vae.decode(z), y)
        trace.records.append(rec)
    x = vae.decode(z)
    if regularizer == "gluing" and post_process and op.is_selection:
        x = glue_observations(op, y, x)
    trace.x0_hat, trace.z0_hat = x, z
    return x, trace


def psld_multi_step(model: SubspaceModel, vae: LinearVae, schedule: DiffusionSchedule,
                    op: MeasurementOperator, y: np.ndarray, eta=1.0, gamma=0.1,
                    rng: np.random.Generator | None = None, *, gluing: str = "gradient",
                    post_process: bool = True, assumption: Assumption2Check | None = None,
                    noise: str = "latent"):
    """Latent ancestral loop with measurement and gluing gradient steps.

    ``gluing="closed_form"`` replaces the gluing gradient step by the exact
    minimiser (the two-step analysis).  For selection operators the
    observations are pasted onto the final decoded image unless
    ``post_process=False``.  For blur and averaging operators the gluing
    term still uses ``A^T y`` as pseudo-data, but no pasting is done.
    """
    if gluing not in ("gradient", "closed_form"):
        raise ConfigError("gluing must be 'gradient' or 'closed_form'")
    return _latent_multi_step(model, vae, schedule, op, y, eta, gamma, rng, "gluing",
                              gluing=gluing, post_process=post_process, assumption=assumption,
                              noise=noise)


def gml_dps_multi_step(model: SubspaceModel, vae: LinearVae, schedule: DiffusionSchedule,
                       op: MeasurementOperator, y: np.ndarray, eta=1.0, gamma=0.1,
                       rng: np.random.Generator | None = None, *,
                       assumption: Assumption2Check | None = None, noise: str = "latent"):
    """Latent loop with the goodness term in place of gluing.

    With the analytic VAE ``E(D(z)) = z`` so the goodness gradient is zero
    and the output coincides with :func:`latent_dps_multi_step`.
    """
    return _latent_multi_step(model, vae, schedule, op, y, eta, gamma, rng, "goodness",
                              assumption=assumption, noise=noise)


def latent_dps_multi_step(model: SubspaceModel, vae: LinearVae, schedule: DiffusionSchedule,
                          op: MeasurementOperator, y: np.ndarray, eta=1.0,
                          rng: np.random.Generator | None = None, *,
                          assumption: Assumption2Check | None = None, noise: str = "latent"):
    """Vanilla latent DPS: measurement guidance through the decoder only."""
    return _latent_multi_step(model, vae, schedule, op, y, eta, 0.0, rng, "none",
                              assumption=assumption, noise=noise)


def run_sampler(config: SamplerConfig, model: SubspaceModel, vae: LinearVae, op: MeasurementOperator,
                y: np.ndarray, rng: np.random.Generator, *, beta: float = 0.5,
                schedule: DiffusionSchedule | None = None, assumption: Assumption2Check | None = None):
    """Dispatch on ``config.algorithm`` and ``config.regime``."""
    alg, gamma = config.algorithm, config.gamma_value
    if config.regime == "two_step_exact":
        if alg == "DPS":
            return dps_two_step(model, op, y, config.zeta, rng, beta=beta, assumption=assumption)
        if alg == "GML_DPS":
            return gml_dps_two_step(model, vae, op, y, config.eta, rng, gamma=gamma,
                                    assumption=assumption)
        if alg == "PSLD":
            return psld_two_step(model, vae, op, y, config.eta, rng, assumption=assumption)
        raise ConfigError(f"{alg} has no two-step exact regime")
    schedule = schedule if schedule is not None else DiffusionSchedule.linear(config.T)
    if alg == "DPS":
        return dps_multi_step(model, schedule, op, y, config.zeta, rng, assumption=assumption)
    if alg == "GML_DPS":
        return gml_dps_multi_step(model, vae, schedule, op, y, config.eta, gamma, rng,
                                  assumption=assumption, noise=config.noise)
    if alg == "LATENT_DPS":
        return latent_dps_multi_step(model, vae, schedule, op, y, config.eta, rng,
                                     assumption=assumption, noise=config.noise)
    return psld_multi_step(model, vae, schedule, op, y, config.eta, gamma, rng,
                           assumption=assumption, noise=config.noise)
