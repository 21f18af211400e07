"""Run configuration read from a TOML file.

Schema (every table and key optional; defaults shown)::

    seed = 0                    # training and evaluation randomness
    threshold = 0.5             # duplicate probability must exceed this

    [blocking]
    radius_m = 400.0
    max_rel_gap = 0.25
    max_abs_gap = 50000.0

    [tree]
    min_leaf = 5.0
    max_depth = 12
    prune = true
    confidence = 0.25
    boosting_trials = 1

    [dedup]
    min_duration_days = 14
    ratio_low = 0.5
    ratio_high = 1.5
    min_units_per_city = 30
    apply_filters = true
    density = [5, 6]

    [generator]                 # any GeneratorConfig field
    weeks = 26
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .blocking import BlockingParams
from .pairs import DUPLICATE_THRESHOLD
from .synth import GeneratorConfig
from .time_machine import DedupParams
from .tree import TreeParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    blocking: BlockingParams = BlockingParams()
    tree: TreeParams = TreeParams()
    dedup: DedupParams = DedupParams()
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    threshold: float = DUPLICATE_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        b = self.blocking
        if min(b.radius_m, b.max_rel_gap, b.max_abs_gap) <= 0:
            raise ConfigError("blocking thresholds must be positive")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")
        num, den = self.dedup.density
        if not (isinstance(num, int) and isinstance(den, int) and 0 < num <= den):
            raise ConfigError("density must be an integer pair 0 < num <= den")
        if self.dedup.min_duration_days < 0 or not 0 < self.dedup.ratio_low < self.dedup.ratio_high:
            raise ConfigError("filter bounds out of range")
        if min(self.tree.min_leaf, self.tree.max_depth, self.tree.boosting_trials) <= 0:
            raise ConfigError("tree parameters must be positive")


def _section(cls, values, name):
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    return values


def config_from_dict(d: dict) -> RunConfig:
    top = {"blocking", "tree", "dedup", "generator", "threshold", "seed"}
    unknown = sorted(set(d) - top)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    try:
        blocking = BlockingParams(**_section(BlockingParams, d.get("blocking", {}), "blocking"))
        dedup_vals = dict(_section(DedupParams, d.get("dedup", {}), "dedup"))
        if "density" in dedup_vals:
            dedup_vals["density"] = tuple(dedup_vals["density"])
        dedup = replace(DedupParams(**dedup_vals), blocking=blocking)
        seed = int(d.get("seed", 0))
        tree_vals = {"seed": seed, **_section(TreeParams, d.get("tree", {}), "tree")}
        tree = TreeParams(**tree_vals)
        gen_vals = _section(GeneratorConfig, d.get("generator", {}), "generator")
        generator = GeneratorConfig.from_dict(gen_vals) if gen_vals else GeneratorConfig()
        return RunConfig(blocking, tree, dedup, generator, float(d.get("threshold", DUPLICATE_THRESHOLD)), seed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)
