"""scikit-learn style wrappers around the samplers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .diffusion import DiffusionSchedule
from .linmodel import AnalyticVae, SubspaceModel
from .operators import MeasurementOperator, check_assumption2
from .oracle import relative_error
from .samplers import SamplerConfig, run_sampler


def fit_subspace(X: np.ndarray, n_components: int) -> SubspaceModel:
    """Orthonormal basis of the top ``n_components`` left singular vectors of ``X^T``.

    No centring: the signal model is a zero-mean linear subspace.
    """
    X = check_array(X)
    if not 1 <= n_components <= min(X.shape):
        raise ValueError(f"n_components must lie in [1, {min(X.shape)}], got {n_components}")
    U, _, _ = np.linalg.svd(X.T, full_matrices=False)
    return SubspaceModel(U[:, :n_components])


class MeasurementTransformer(TransformerMixin, BaseEstimator):
    """Apply ``A`` (plus ``sigma_y`` noise) to each row of ``X``."""

    def __init__(self, operator: MeasurementOperator | None = None, random_state=None):
        self.operator = operator
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        if self.operator is None:
            raise ValueError("operator must be set")
        if X.shape[1] != self.operator.cols:
            raise ValueError(f"X has {X.shape[1]} features, operator expects {self.operator.cols}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        Y = self.operator.apply(X)
        if self.operator.sigma_y > 0:
            rng = np.random.default_rng(self.random_state)
            Y = Y + self.operator.sigma_y * rng.standard_normal(Y.shape)
        return Y


class SubspacePosteriorSampler(TransformerMixin, BaseEstimator):
    """Reconstruct signals from measurements with DPS, GML-DPS or PSLD.

    ``fit`` learns the signal subspace from clean training signals (rows of
    ``X``) unless ``subspace`` is given; ``transform`` maps measurement rows
    to reconstructed signals.

    Parameters
    ----------
    operator : MeasurementOperator
        The forward operator that produced the measurements.
    n_components : int, optional
        Subspace rank to learn.  Ignored when ``subspace`` is set.
    algorithm, regime, eta, gamma, zeta, n_steps, noise
        Forwarded to :class:`~subspace_psld.samplers.SamplerConfig`.
    beta : float
        Two-step variance.
    beta_start, beta_end : float
        Linear schedule for the multi-step regime.
    random_state : int or None
        Seed for the sampler noise; each ``transform`` call restarts from it.
    """

    def __init__(self, operator=None, n_components=None, subspace=None, algorithm="PSLD",
                 regime="two_step_exact", eta=1.0, gamma=None, zeta=1.0, n_steps=100,
                 noise="latent", beta=0.5, beta_start=1e-4, beta_end=0.02, random_state=None):
        self.operator = operator
        self.n_components = n_components
        self.subspace = subspace
        self.algorithm = algorithm
        self.regime = regime
        self.eta = eta
        self.gamma = gamma
        self.zeta = zeta
        self.n_steps = n_steps
        self.noise = noise
        self.beta = beta
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.random_state = random_state

    def _sampler_config(self):
        return SamplerConfig(algorithm=self.algorithm, regime=self.regime, eta=self.eta,
                             gamma=self.gamma, zeta=self.zeta, T=self.n_steps, noise=self.noise)

    def fit(self, X=None, y=None):
        if self.operator is None:
            raise ValueError("operator must be set")
        if self.subspace is not None:
            model = self.subspace
        else:
            if X is None or self.n_components is None:
                raise ValueError("fit needs training signals X and n_components, or a subspace")
            model = fit_subspace(X, int(self.n_components))
        if model.d != self.operator.cols:
            raise ValueError(f"subspace has d={model.d}, operator expects {self.operator.cols}")
        self.sampler_config_ = self._sampler_config()
        self.model_ = model
        self.vae_ = AnalyticVae.from_model(model)
        self.assumption_ = check_assumption2(self.operator, model)
        self.schedule_ = DiffusionSchedule.linear(self.n_steps, self.beta_start, self.beta_end)
        self.n_features_in_ = model.d
        return self

    def transform(self, Y):
        """Reconstructions, one row per measurement row in ``Y``."""
        check_is_fitted(self, "model_")
        Y = check_array(Y)
        if Y.shape[1] != self.operator.rows:
            raise ValueError(f"Y has {Y.shape[1]} columns, operator produces {self.operator.rows}")
        rng = np.random.default_rng(self.random_state)
        out = np.empty((Y.shape[0], self.model_.d))
        for i, y in enumerate(Y):
            out[i], _ = run_sampler(self.sampler_config_, self.model_, self.vae_, self.operator, y,
                                    rng, beta=self.beta, schedule=self.schedule_,
                                    assumption=self.assumption_)
        return out

    def score(self, Y, X):
        """Negative mean relative reconstruction error against clean signals ``X``."""
        X = check_array(X)
        X_hat = self.transform(Y)
        return -float(np.mean([relative_error(a, b) for a, b in zip(X_hat, X)]))
