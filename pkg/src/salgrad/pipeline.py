"""End-to-end orchestration: raw -> smoothed -> refined saliency maps."""

import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import lowlevel, superpixel
from .saliency import SaliencyParams, run_saliency

STAGES = ("raw", "smoothed", "refined")


@dataclass
class PipelineConfig:
    model: str = ""
    gamma: float = 1.0
    epsilon: float | None = None
    iterations: int = 10
    theta: float | None = None
    superpixels: int = 100
    compactness: float = 10.0
    alpha: float = 0.3
    sigma_color: float = 10.0
    sigma_dist: float = 0.25
    stages: tuple = STAGES
    seed: int = 0

    def __post_init__(self):
        if self.superpixels < 1:
            raise ValueError(f"superpixels must be >= 1, got {self.superpixels}")
        if self.compactness <= 0:
            raise ValueError(f"compactness must be > 0, got {self.compactness}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages: {sorted(unknown)}")
        # delegate the saliency parameter checks
        SaliencyParams(self.gamma, self.epsilon, self.iterations, self.theta)

    def saliency_params(self):
        return SaliencyParams(self.gamma, self.epsilon, self.iterations, self.theta)


_FIELD_TYPES = {
    "model": str,
    "gamma": float,
    "epsilon": float,
    "iterations": int,
    "theta": float,
    "superpixels": int,
    "compactness": float,
    "alpha": float,
    "sigma_color": float,
    "sigma_dist": float,
    "stages": "stages",
    "seed": int,
}


def serialize_config(config):
    """Flat key=value text; ``none`` stands for unset optional values."""
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "stages":
            value = ",".join(value)
        elif value is None:
            value = "none"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def parse_config(text):
    """Parse the flat key=value format; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        if _FIELD_TYPES[key] == "stages":
            values[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
        elif raw.lower() == "none":
            values[key] = None
        else:
            values[key] = _FIELD_TYPES[key](raw)
    return PipelineConfig(**values)


@dataclass
class PipelineResult:
    maps: dict
    label: int
    cost_trace: list
    epsilon: float
    timings: dict = field(default_factory=dict)


def run_pipeline(net, image, config=PipelineConfig()):
    """Run the three saliency stages in order on one image.

    Only the stages named in ``config.stages`` are returned, but earlier
    stages are always computed since later ones depend on them.
    """
    image = np.asarray(image, dtype=np.float64)
    timings = {}

    t0 = time.perf_counter()
    run = run_saliency(net, image, config.saliency_params())
    timings["raw"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sp = superpixel.slic(
        image, config.superpixels, config.compactness
    )
    smoothed = superpixel.smooth(run.raw_map, sp)
    timings["smoothed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    s_l = lowlevel.lowlevel_map(
        image,
        sp,
        alpha=config.alpha,
        sigma_color=config.sigma_color,
        sigma_dist_frac=config.sigma_dist,
    )
    product = smoothed * s_l
    theta = 0.1 * float(product.max())
    refined = lowlevel.refine(smoothed, s_l, theta)
    timings["refined"] = time.perf_counter() - t0

    all_maps = {"raw": run.raw_map, "smoothed": smoothed, "refined": refined}
    maps = {stage: all_maps[stage] for stage in STAGES if stage in config.stages}
    return PipelineResult(
        maps=maps,
        label=run.label,
        cost_trace=run.cost_trace,
        epsilon=run.epsilon,
        timings=timings,
    )
