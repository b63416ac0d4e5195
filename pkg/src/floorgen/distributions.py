"""Target parameter distributions, sampling, and the W1 merge criterion.

The ten generation parameters are each backed by a small distribution
family.  Real-design statistics are not public, so the shipped defaults in
``data/default_dist.json`` are configurable stand-ins with the documented
supports; drop in a replacement file to use measured statistics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

DIST_SCHEMA = "floorset-dist v1"
CONFIG_SCHEMA = "floorset-config v1"


class DistributionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    """One named 1-D distribution with a parametric family.

    Families:
      constant(value)
      uniform(low, high)            continuous, inclusive bounds
      uniform_int(low, high)        integers, inclusive bounds
      choice(values)                uniform over a finite list
      lognormal(mu, sigma, clip)    exp(N(mu, sigma)) clipped to [clip0, clip1]
    """

    family: str
    params: dict = field(default_factory=dict)

    def sample(self, rng: np.random.Generator):
        f, p = self.family, self.params
        if f == "constant":
            return p["value"]
        if f == "uniform":
            return float(rng.uniform(p["low"], p["high"]))
        if f == "uniform_int":
            return int(rng.integers(p["low"], p["high"] + 1))
        if f == "choice":
            return p["values"][int(rng.integers(0, len(p["values"])))]
        if f == "lognormal":
            v = float(np.exp(rng.normal(p["mu"], p["sigma"])))
            lo, hi = p["clip"]
            return float(min(max(v, lo), hi))
        raise DistributionError(f"unknown distribution family {f!r}")

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.array([self.sample(rng) for _ in range(n)], dtype=float)

    def to_json(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "Distribution":
        if "family" not in obj:
            raise DistributionError(f"distribution entry missing 'family': {obj}")
        params = {k: v for k, v in obj.items() if k != "family"}
        if "values" in params:
            params["values"] = list(params["values"])
        if "clip" in params:
            params["clip"] = tuple(params["clip"])
        d = cls(obj["family"], params)
        d.sample(np.random.default_rng(0))  # fail fast on malformed params
        return d


@dataclass(frozen=True)
class ConditionalWeight:
    """Net-weight distribution conditioned on normalized net length.

    Beta-distributed weight in (0, 1] whose mean interpolates linearly from
    ``mean_at_zero`` (length 0) to ``mean_at_one`` (length 1); longer nets
    therefore carry lighter weights on average.
    """

    mean_at_zero: float = 0.65
    mean_at_one: float = 0.30
    concentration: float = 6.0

    def __post_init__(self):
        for m in (self.mean_at_zero, self.mean_at_one):
            if not 0.0 < m < 1.0:
                raise DistributionError("conditional means must lie in (0, 1)")
        if self.concentration <= 0:
            raise DistributionError("concentration must be positive")

    def sample(self, normalized_length: float, rng: np.random.Generator) -> float:
        if not 0.0 <= normalized_length <= 1.0:
            raise DistributionError(
                f"normalized length {normalized_length} outside [0, 1]"
            )
        m = self.mean_at_zero + (self.mean_at_one - self.mean_at_zero) * normalized_length
        a = m * self.concentration
        b = (1.0 - m) * self.concentration
        w = float(rng.beta(a, b))
        return min(max(w, 1e-9), 1.0)

    def to_json(self) -> dict:
        return {
            "family": "beta_linear_mean",
            "mean_at_zero": self.mean_at_zero,
            "mean_at_one": self.mean_at_one,
            "concentration": self.concentration,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConditionalWeight":
        if obj.get("family") != "beta_linear_mean":
            raise DistributionError(
                f"net weight entry must use family 'beta_linear_mean', got {obj.get('family')!r}"
            )
        return cls(obj["mean_at_zero"], obj["mean_at_one"], obj["concentration"])


@dataclass(frozen=True)
class ConstantWeight:
    """Degenerate conditional: every net gets the same weight."""

    value: float = 0.5

    def sample(self, normalized_length: float, rng: np.random.Generator) -> float:
        if not 0.0 <= normalized_length <= 1.0:
            raise DistributionError(
                f"normalized length {normalized_length} outside [0, 1]"
            )
        return self.value

    def to_json(self) -> dict:
        return {"family": "constant", "value": self.value}


# Parameter name -> (support check, description) for validation and docs.
PARAM_NAMES = (
    "aspect_ratio",      # bounding-box W/H of a partition
    "terminal_ratio",    # terminal count / partition count
    "b2b_density",       # nonzero fraction of the inter-partition matrix
    "t2b_density",       # nonzero fraction of the terminal-partition matrix
    "net_weight",        # weight | normalized length (conditional)
    "boundary_frac",     # fraction of partitions with edge/corner affinity
    "cluster_frac",      # fraction of partitions in abutment clusters
    "cluster_count",     # number of clusters
    "preplaced_frac",    # fraction of partitions with fixed positions
    "multi_inst_frac",   # fraction of partitions in shape-sharing groups
)


@dataclass(frozen=True)
class TargetDistributions:
    """The ten sampled generation parameters."""

    aspect_ratio: Distribution
    terminal_ratio: Distribution
    b2b_density: Distribution
    t2b_density: Distribution
    net_weight: Union[ConditionalWeight, ConstantWeight]
    boundary_frac: Distribution
    cluster_frac: Distribution
    cluster_count: Distribution
    preplaced_frac: Distribution
    multi_inst_frac: Distribution

    def sample(self, name: str, rng: np.random.Generator):
        if name not in PARAM_NAMES or name == "net_weight":
            raise DistributionError(f"unknown samplable parameter {name!r}")
        return getattr(self, name).sample(rng)

    @classmethod
    def defaults(cls) -> "TargetDistributions":
        return load_distributions(None)

    def to_json(self) -> dict:
        out = {"schema": DIST_SCHEMA}
        for name in PARAM_NAMES:
            out[name] = getattr(self, name).to_json()
        return out


def load_distributions(path: Union[str, Path, None]) -> TargetDistributions:
    """Load a ``floorset-dist v1`` file; ``None`` loads the packaged defaults."""
    if path is None:
        text = resources.files("floorgen.data").joinpath("default_dist.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise DistributionError(f"distribution file is not valid JSON: {e}") from e
    if obj.get("schema") != DIST_SCHEMA:
        raise DistributionError(
            f"expected schema {DIST_SCHEMA!r}, got {obj.get('schema')!r}"
        )
    missing = [n for n in PARAM_NAMES if n not in obj]
    if missing:
        raise DistributionError(f"distribution file missing entries: {missing}")
    kw = {}
    for name in PARAM_NAMES:
        entry = obj[name]
        if name == "net_weight":
            if entry.get("family") == "constant":
                kw[name] = ConstantWeight(entry["value"])
            else:
                kw[name] = ConditionalWeight.from_json(entry)
        else:
            kw[name] = Distribution.from_json(entry)
    return TargetDistributions(**kw)


def save_distributions(dists: TargetDistributions, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(dists.to_json(), indent=2, sort_keys=True) + "\n")


def wasserstein_1d(samples_a, samples_b) -> float:
    """W1 distance between two empirical distributions of equal-weight atoms.

    Computed as the integral of |F_a - F_b| over the merged support, which
    equals the quantile-coupling optimal transport cost and supports unequal
    sample counts.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DistributionError("wasserstein_1d needs non-empty samples")
    a = np.sort(a)
    b = np.sort(b)
    allv = np.concatenate([a, b])
    allv.sort(kind="mergesort")
    deltas = np.diff(allv)
    if deltas.size == 0:
        return 0.0
    cdf_a = np.searchsorted(a, allv[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, allv[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def sample_net_weight(
    net_weight: Union[ConditionalWeight, ConstantWeight],
    normalized_length: float,
    rng: np.random.Generator,
) -> float:
    """Draw a net weight in (0, 1] from the conditional slice at this length."""
    return net_weight.sample(normalized_length, rng)


def empirical_aspects(partitions) -> list[float]:
    """Bounding-box aspect multiset of a partition list."""
    if not partitions:
        raise DistributionError("empirical_aspects needs a non-empty partition list")
    return [p.aspect for p in partitions]


# ---------------------------------------------------------------------------
# Generation configuration


@dataclass(frozen=True)
class SweepSpec:
    """Fixed value, finite choice set, or inclusive integer range."""

    kind: str  # "fixed" | "choices" | "range"
    values: tuple

    def sample(self, rng: np.random.Generator):
        if self.kind == "fixed":
            return self.values[0]
        if self.kind == "choices":
            return self.values[int(rng.integers(0, len(self.values)))]
        lo, hi = self.values
        return int(rng.integers(lo, hi + 1))

    @classmethod
    def parse(cls, obj, *, pair: bool) -> "SweepSpec":
        def as_value(v):
            if pair:
                if not (isinstance(v, (list, tuple)) and len(v) == 2):
                    raise ConfigError(f"expected a [W, H] pair, got {v!r}")
                return (int(v[0]), int(v[1]))
            return int(v)

        if isinstance(obj, dict):
            if "choices" in obj:
                vals = tuple(as_value(v) for v in obj["choices"])
                if not vals:
                    raise ConfigError("empty choices list")
                return cls("choices", vals)
            if "range" in obj:
                if pair:
                    raise ConfigError("ranges are only supported for scalar sweeps")
                lo, hi = obj["range"]
                if lo > hi:
                    raise ConfigError(f"bad range [{lo}, {hi}]")
                return cls("range", (int(lo), int(hi)))
            raise ConfigError(f"sweep spec needs 'choices' or 'range': {obj!r}")
        if pair:
            return cls("fixed", (as_value(obj),))
        if isinstance(obj, (list, tuple)):
            raise ConfigError(f"scalar sweep cannot be a list: {obj!r}; use choices/range")
        return cls("fixed", (int(obj),))

    def to_json(self):
        if self.kind == "fixed":
            v = self.values[0]
            return list(v) if isinstance(v, tuple) else v
        if self.kind == "choices":
            return {"choices": [list(v) if isinstance(v, tuple) else v for v in self.values]}
        return {"range": list(self.values)}


_CONFIG_KEYS = {
    "schema",
    "num_layouts",
    "foutline_shape",
    "num_partitions",
    "rectilinear_flag",
    "placement_constraints_flag",
    "dataset_mode",
    "seed",
    # optional tuning knobs
    "terminal_pitch_slack",
    "aspect_target_samples",
    "retry_budget",
    "fill_target",
}


@dataclass(frozen=True)
class GenConfig:
    """Contents of a ``floorset-config v1`` generation configuration."""

    num_layouts: int
    foutline_shape: SweepSpec
    num_partitions: SweepSpec
    rectilinear_flag: int
    placement_constraints_flag: int
    dataset_mode: str
    seed: int
    terminal_pitch_slack: float = 0.5
    aspect_target_samples: int = 256
    retry_budget: int = 20
    fill_target: float = 0.955

    def __post_init__(self):
        if self.num_layouts < 0:
            raise ConfigError("num_layouts must be >= 0")
        if self.rectilinear_flag not in (0, 1):
            raise ConfigError("rectilinear_flag must be 0 or 1")
        if self.placement_constraints_flag not in (0, 1):
            raise ConfigError("placement_constraints_flag must be 0 or 1")
        if self.dataset_mode not in ("Prime", "Lite"):
            raise ConfigError("dataset_mode must be 'Prime' or 'Lite'")
        if not 0.0 < self.terminal_pitch_slack <= 1.0:
            raise ConfigError("terminal_pitch_slack must be in (0, 1]")
        if not 0.90 < self.fill_target <= 1.0:
            raise ConfigError("fill_target must be in (0.90, 1.0]")

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        if obj.get("schema") != CONFIG_SCHEMA:
            raise ConfigError(
                f"expected schema {CONFIG_SCHEMA!r}, got {obj.get('schema')!r}"
            )
        unknown = set(obj) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k in ("num_layouts", "foutline_shape", "num_partitions", "dataset_mode", "seed"):
            if k not in obj:
                raise ConfigError(f"config missing required key {k!r}")
        kw = dict(
            num_layouts=int(obj["num_layouts"]),
            foutline_shape=SweepSpec.parse(obj["foutline_shape"], pair=True),
            num_partitions=SweepSpec.parse(obj["num_partitions"], pair=False),
            rectilinear_flag=int(obj.get("rectilinear_flag", 1)),
            placement_constraints_flag=int(obj.get("placement_constraints_flag", 1)),
            dataset_mode=str(obj["dataset_mode"]),
            seed=int(obj["seed"]),
        )
        for k in ("terminal_pitch_slack", "aspect_target_samples", "retry_budget", "fill_target"):
            if k in obj:
                kw[k] = obj[k]
        return cls(**kw)

    def to_json(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "num_layouts": self.num_layouts,
            "foutline_shape": self.foutline_shape.to_json(),
            "num_partitions": self.num_partitions.to_json(),
            "rectilinear_flag": self.rectilinear_flag,
            "placement_constraints_flag": self.placement_constraints_flag,
            "dataset_mode": self.dataset_mode,
            "seed": self.seed,
            "terminal_pitch_slack": self.terminal_pitch_slack,
            "aspect_target_samples": self.aspect_target_samples,
            "retry_budget": self.retry_budget,
            "fill_target": self.fill_target,
        }


def load_config(path: Union[str, Path]) -> GenConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    return GenConfig.from_json(obj)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for instance ``index`` of a run."""
    return np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFFFFFFFFFF, index)))
