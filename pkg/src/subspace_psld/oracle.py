"""Closed-form least-squares recovery on the signal subspace."""

import numpy as np

from .errors import AssumptionViolation
from .linmodel import SubspaceModel
from .operators import MeasurementOperator


def oracle_recover(model: SubspaceModel, op: MeasurementOperator, y: np.ndarray,
                   tol: float = 1e-10) -> np.ndarray:
    """``S M^{-1} (AS)^T y`` with ``M = (AS)^T (AS)``.

    The unique subspace point matching noiseless measurements; with noise,
    the least-squares fit within ``range(S)``.
    """
    AS = op.times_basis(model.S)
    M = AS.T @ AS
    if np.linalg.eigvalsh(M).min() <= tol:
        raise AssumptionViolation("(AS)^T(AS) is singular; the subspace point is not identifiable")
    w = np.linalg.solve(M, AS.T @ np.asarray(y, dtype=float))
    return model.S @ w


def relative_error(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    denom = np.linalg.norm(x_true)
    err = np.linalg.norm(np.asarray(x_hat) - x_true)
    return float(err / denom) if denom > 0 else float(err)
