"""Experiment configuration stored as YAML.

Grammar (all keys optional except ``model``)::

    model: {d: 64, l: 8, seed: 0}      # subspace model
    image_shape: [8, 8]                   # height, width; default square when d is
    beta: 0.5                             # two-step variance
    schedule: {beta_start: 1.0e-4, beta_end: 0.02}   # linear; T is per sampler
    operators:                            # list of operator specs
      - {kind: random_inpaint, drop_prob: 0.5, seed: null, sigma_y: 0.0, name: inpaint}
    samplers:                             # list of sampler specs
      - {algorithm: PSLD, regime: two_step_exact, eta: 1.0}
    n_trials: 100
    seed_base: 0
    tolerance: 1.0e-8
    peak: null                            # PSNR/SSIM peak; null = range of ground truth
    write_images: false
    image_bits: 8
    out_dir: results
    verify: {regression_samples: 100000, psld_etas: [0.01, 1.0, 100.0],
             triples: [[16, 4, 0.3], [64, 8, 0.1], [8, 8, 0.5]]}

Operator specs take the keyword arguments of the matching ``make_*``
factory; a random-inpainting ``seed: null`` means "use the trial seed".
Sampler specs take the fields of :class:`~subspace_psld.samplers.SamplerConfig`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..errors import ConfigError
from ..operators import KINDS, operator_from_dict
from ..samplers import SamplerConfig

_IMAGE_KINDS = ("box_inpaint", "super_resolution", "gaussian_blur", "motion_blur", "destripe")
_SAMPLER_FIELDS = ("algorithm", "regime", "eta", "gamma", "zeta", "T", "noise")

DEFAULT_VERIFY = {
    "regression_samples": 100_000,
    "psld_etas": [0.01, 1.0, 100.0],
    "triples": [[16, 4, 0.3], [64, 8, 0.1], [8, 8, 0.5]],
}


def _num(v):
    """YAML 1.1 reads ``1e-4`` as a string; accept it as a float."""
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    if isinstance(v, list):
        return [_num(x) for x in v]
    return v


@dataclass
class ExperimentConfig:
    model: dict[str, int] = field(default_factory=lambda: {"d": 64, "l": 8, "seed": 0})
    image_shape: list[int] | None = None
    beta: float = 0.5
    schedule: dict[str, float] = field(
        default_factory=lambda: {"beta_start": 1e-4, "beta_end": 0.02})
    operators: list[dict[str, Any]] = field(
        default_factory=lambda: [{"kind": "random_inpaint", "drop_prob": 0.5, "seed": None,
                                  "sigma_y": 0.0}])
    samplers: list[SamplerConfig] = field(default_factory=lambda: [SamplerConfig()])
    n_trials: int = 100
    seed_base: int = 0
    tolerance: float = 1e-8
    peak: float | None = None
    write_images: bool = False
    image_bits: int = 8
    out_dir: str = "results"
    verify: dict[str, Any] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_VERIFY)))

    def __post_init__(self):
        self.validate()

    @property
    def d(self) -> int:
        return int(self.model["d"])

    @property
    def shape(self) -> tuple[int, int] | None:
        if self.image_shape is not None:
            return tuple(int(s) for s in self.image_shape)
        r = math.isqrt(self.d)
        return (r, r) if r * r == self.d else None

    def validate(self):
        try:
            d, l = int(self.model["d"]), int(self.model["l"])  # noqa: E741
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model needs integer d and l: {exc}") from None
        if not 1 <= l <= d:
            raise ConfigError(f"model requires 1 <= l <= d, got d={d}, l={l}")
        if self.image_shape is not None:
            if len(self.image_shape) != 2 or self.image_shape[0] * self.image_shape[1] != d:
                raise ConfigError(f"image_shape {self.image_shape} does not multiply to d={d}")
        if not 0.0 < float(self.beta) < 1.0:
            raise ConfigError("beta must lie in (0, 1)")
        unknown = set(self.schedule) - {"beta_start", "beta_end"}
        if unknown:
            raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
        for s in self.samplers:
            if int(s.T) < 1:
                raise ConfigError("sampler T must be >= 1")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.image_bits not in (8, 16):
            raise ConfigError("image_bits must be 8 or 16")
        if not self.operators:
            raise ConfigError("at least one operator is required")
        for spec in self.operators:
            kind = spec.get("kind")
            if kind not in KINDS:
                raise ConfigError(f"unknown operator kind {kind!r}")
            if kind in _IMAGE_KINDS and self.shape is None:
                raise ConfigError(f"{kind} needs image_shape (d={d} is not a perfect square)")
            try:
                self.build_operator(spec, trial_seed=0)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid operator spec {spec}: {exc}") from None
        names = [self.task_name(i) for i in range(len(self.operators))]
        if len(set(names)) != len(names):
            raise ConfigError(f"operator task names must be unique, got {names}")

    def task_name(self, index: int) -> str:
        spec = self.operators[index]
        return str(spec.get("name", spec["kind"]))

    def build_operator(self, spec: dict[str, Any], trial_seed: int):
        spec = {k: v for k, v in spec.items() if k != "name"}
        spec["d"] = self.d
        if spec["kind"] == "random_inpaint" and spec.get("seed") is None:
            spec["seed"] = int(trial_seed)
        if self.shape is not None:
            spec["height"], spec["width"] = self.shape
        return operator_from_dict(spec)

    def make_schedule(self, T: int):
        from ..diffusion import DiffusionSchedule
        return DiffusionSchedule.linear(int(T), float(self.schedule.get("beta_start", 1e-4)),
                                        float(self.schedule.get("beta_end", 0.02)))

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "samplers":
                v = [sampler_to_dict(s) for s in v]
            out[f.name] = v
        return json.loads(json.dumps(out))

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path):
        Path(path).write_text(self.dumps())


def sampler_to_dict(s: SamplerConfig) -> dict[str, Any]:
    out = {}
    for name in _SAMPLER_FIELDS:
        v = getattr(s, name)
        out[name] = list(v) if isinstance(v, (tuple, np.ndarray)) else v
    return out


def sampler_from_dict(spec: dict[str, Any]) -> SamplerConfig:
    unknown = set(spec) - set(_SAMPLER_FIELDS)
    if unknown:
        raise ConfigError(f"unknown sampler keys {sorted(unknown)}")
    kw = {}
    for k, v in spec.items():
        v = _num(v)
        kw[k] = tuple(v) if isinstance(v, list) else v
    try:
        return SamplerConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    kw = dict(data)
    if "samplers" in kw:
        kw["samplers"] = [sampler_from_dict(s) for s in kw["samplers"]]
    if "operators" in kw:
        kw["operators"] = [{k: _num(v) for k, v in spec.items()} for spec in kw["operators"]]
    for key in ("beta", "tolerance", "peak"):
        if key in kw and kw[key] is not None:
            kw[key] = float(_num(kw[key]))
    if "schedule" in kw:
        kw["schedule"] = {k: _num(v) for k, v in kw["schedule"].items()}
    if "verify" in kw:
        merged = json.loads(json.dumps(DEFAULT_VERIFY))
        merged.update({k: _num(v) for k, v in (kw["verify"] or {}).items()})
        kw["verify"] = merged
    return ExperimentConfig(**kw)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return config_from_dict(data or {})


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return loads(text)


def stable_hash(obj: Any, length: int = 12) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:length]
