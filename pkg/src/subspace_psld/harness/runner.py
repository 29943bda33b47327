"""Grid runs: (operator, trial seed) jobs, each running every configured sampler."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import AssumptionViolation
from ..linmodel import AnalyticVae, make_subspace_model, sample_signal
from ..metrics import psnr, ssim
from ..operators import check_assumption2, measure
from ..oracle import oracle_recover, relative_error
from ..samplers import run_sampler
from .config import ExperimentConfig, config_from_dict, sampler_to_dict, stable_hash
from .pgm import write_pgm

log = logging.getLogger(__name__)


@dataclass
class ResultRow:
    config_hash: str
    task: str
    seed: int
    algorithm: str
    regime: str
    relative_error: float
    oracle_error: float
    psnr: float
    ssim: float
    measurement_residual: float
    wall_time_ms: float
    assumption2_min_eig: float


COLUMNS = [f.name for f in fields(ResultRow)]


def trial_rngs(seed: int):
    """Independent streams for the signal, the measurement noise and the samplers."""
    return (np.random.default_rng([seed, 0]), [seed, 1], np.random.default_rng([seed, 2]))


def cell_hash(cfg: ExperimentConfig, op_index: int, sampler_index: int) -> str:
    cell = {"model": cfg.model, "image_shape": cfg.shape, "beta": cfg.beta,
            "schedule": cfg.schedule, "operator": cfg.operators[op_index],
            "sampler": sampler_to_dict(cfg.samplers[sampler_index]), "peak": cfg.peak}
    return stable_hash(cell)


def _format(v) -> str:
    if isinstance(v, float):
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def run_trial(cfg_dict: dict, op_index: int, seed: int, image_dir: str | None = None):
    """Run every sampler on one (operator, seed) cell; returns ``ResultRow`` list."""
    cfg = config_from_dict(cfg_dict)
    model = make_subspace_model(cfg.d, int(cfg.model["l"]), int(cfg.model.get("seed", 0)))
    vae = AnalyticVae.from_model(model)
    op = cfg.build_operator(cfg.operators[op_index], trial_seed=seed)
    signal_rng, noise_seed, _ = trial_rngs(seed)
    _, x0 = sample_signal(model, signal_rng)
    y = measure(op, x0, noise_seed).y
    check = check_assumption2(op, model)
    try:
        x_oracle = oracle_recover(model, op, y)
    except AssumptionViolation:
        x_oracle = None
    peak = cfg.peak if cfg.peak is not None else float(x0.max() - x0.min())
    shape = cfg.shape
    task = cfg.task_name(op_index)
    rows = []
    for j, sampler in enumerate(cfg.samplers):
        rng = trial_rngs(seed)[2]
        start = time.perf_counter()
        try:
            x_hat, _ = run_sampler(sampler, model, vae, op, y, rng, beta=cfg.beta,
                                   schedule=cfg.make_schedule(sampler.T), assumption=check)
        except AssumptionViolation as exc:
            log.warning("skipping %s/%s seed %d on %s: %s", sampler.algorithm, sampler.regime,
                        seed, task, exc)
            continue
        wall = (time.perf_counter() - start) * 1e3
        img_ssim = float("nan")
        if shape is not None and min(shape) >= 8:
            img_ssim = ssim(x_hat.reshape(shape), x0.reshape(shape), peak=peak)
        rows.append(ResultRow(
            config_hash=cell_hash(cfg, op_index, j), task=task, seed=seed,
            algorithm=sampler.algorithm, regime=sampler.regime,
            relative_error=relative_error(x_hat, x0),
            oracle_error=relative_error(x_hat, x_oracle) if x_oracle is not None else float("nan"),
            psnr=psnr(x_hat, x0, peak=peak), ssim=img_ssim,
            measurement_residual=float(np.linalg.norm(y - op.apply(x_hat))),
            wall_time_ms=wall, assumption2_min_eig=check.min_eig))
        if image_dir is not None and shape is not None:
            _write_images(Path(image_dir), task, seed, sampler, x0, op.apply_transpose(y), x_hat,
                          shape, cfg.image_bits)
    return rows


def _write_images(out, task, seed, sampler, x0, measured, x_hat, shape, bits):
    out.mkdir(parents=True, exist_ok=True)
    lo, hi = float(x0.min()), float(x0.max())
    stem = f"{task}_seed{seed}"
    for name, vec in (("ground_truth", x0), ("measured", measured)):
        write_pgm(out / f"{stem}_{name}.pgm", vec.reshape(shape), lo, hi, bits)
        np.save(out / f"{stem}_{name}.npy", vec)
    tag = f"{stem}_{sampler.algorithm}_{sampler.regime}"
    write_pgm(out / f"{tag}_recovered.pgm", x_hat.reshape(shape), lo, hi, bits)
    np.save(out / f"{tag}_recovered.npy", x_hat)


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = 1) -> list[ResultRow]:
    """Run the whole grid and write ``results.csv`` in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    image_dir = str(out / "images") if cfg.write_images else None
    cfg_dict = cfg.to_dict()
    jobs = [(i, cfg.seed_base + t) for i in range(len(cfg.operators)) for t in range(cfg.n_trials)]
    if workers <= 1:
        results = [run_trial(cfg_dict, i, s, image_dir) for i, s in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_trial, cfg_dict, i, s, image_dir) for i, s in jobs]
            results = [f.result() for f in futures]
    # jobs list order is deterministic, independent of completion order
    rows = [r for batch in results for r in batch]
    write_rows(out / "results.csv", rows)
    return rows


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_format(v) for v in astuple(r)])
