"""Executable acceptance checks on worked examples, oracles and synthetic ground truth.

Every check returns a :class:`CriterionResult`; :func:`run_acceptance` runs a
suite and :func:`format_report` renders the tab-delimited table. Expensive
artifacts (generated streams, trained models, deduplicated panels) are built
once per :class:`Benchmark` and shared between checks.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import pandas as pd

from .blocking import BlockingParams, Points, brute_force_index_pairs, candidate_index_pairs
from .cluster import DuplicateGraph, resolve_clusters
from .indicators import models
from .indicators.panel import ad_weeks_from_snapshots, build_panel
from .indicators.prices import hedonic_index, implied_discount, implied_sale
from .indicators.regress import fit_logit, fit_ols_fe
from .indicators.validation import validation_stats
from .ingest import assemble_ads
from .pairs import evaluate_monte_carlo, precision_recall_f
from .synth import GeneratorConfig, generate, score
from .time_machine import DedupParams, batch_clusters, merge_violations, run_stream
from .training import stream_pairs, train_from_stream
from .tree import TreeParams

log = logging.getLogger(__name__)

# ten ads; the last component has 6 of 10 possible edges and its weakest edge is (4, 5)
WORKED_EXAMPLE_EDGES = (
    (2, 3, 0.91),
    (1, 7, 0.95), (1, 8, 0.88), (7, 8, 0.83),
    (4, 5, 0.52), (4, 6, 0.93), (4, 9, 0.81), (4, 10, 0.86), (6, 9, 0.77), (9, 10, 0.69),
)
WORKED_EXAMPLE_PARTITION = ({2, 3}, {1, 7, 8}, {5}, {4, 6, 9, 10})


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: Optional[float] = None

    def line(self) -> str:
        return f"criterion {self.number:2d} {self.name}: {'PASS' if self.passed else 'FAIL'} ({self.detail})"


@dataclass
class BenchmarkCase:
    """Generator settings shared by the data-driven checks."""

    name: str = "default"
    config: GeneratorConfig = field(default_factory=GeneratorConfig)
    seed: int = 1
    train_seed: int = 101
    tree: TreeParams = TreeParams()
    dedup: DedupParams = DedupParams()


class Benchmark:
    """Lazily built artifacts for one :class:`BenchmarkCase`."""

    def __init__(self, case: BenchmarkCase = BenchmarkCase()):
        self.case = case
        self._cache = {}
        self.timings = {}

    def _get(self, key, build):
        if key not in self._cache:
            t = time.perf_counter()
            self._cache[key] = build()
            self.timings[key] = time.perf_counter() - t
            log.info("built %s in %.1fs", key, self.timings[key])
        return self._cache[key]

    @property
    def data(self):
        return self._get("data", lambda: generate(self.case.config, self.case.seed))

    @property
    def train_data(self):
        return self._get("train_data", lambda: generate(self.case.config, self.case.train_seed))

    @property
    def model(self):
        d = self.train_data
        return self._get("model", lambda: train_from_stream(d.snapshots, d.truth.ad_unit, self.case.tree,
                                                            self.case.dedup.blocking))

    @property
    def stream(self):
        d, m = self.data, self.model
        return self._get("stream", lambda: run_stream(d.snapshots, m, self.case.dedup))

    @property
    def panel(self):
        """Panel of the deduplicated (and filtered) units of the benchmark stream."""
        r = self.stream
        return self._get("panel", lambda: build_panel(r.units, ad_weeks_from_snapshots(self.data.snapshots)))


# --- individual checks --------------------------------------------------------


def check_worked_example(bench=None) -> tuple:
    g = DuplicateGraph.from_edges(WORKED_EXAMPLE_EDGES, nodes=range(1, 11))
    parts = resolve_clusters(g)
    got = sorted(sorted(p) for p in parts)
    want = sorted(sorted(p) for p in WORKED_EXAMPLE_PARTITION)
    return got == want, f"{len(parts)} units: {got}"


def random_points(n: int, rng, n_cities: int = 2, span_m: float = 3000.0) -> Points:
    """Ads scattered over a few small cities with prices around 250k."""
    city = rng.integers(0, n_cities, size=n)
    lat0 = 45.0 + 0.5 * city
    lat = lat0 + rng.uniform(0, span_m, size=n) / 111_195.0
    lon = 9.0 + rng.uniform(0, span_m, size=n) / (111_195.0 * np.cos(np.radians(lat0)))
    price = np.round(np.exp(rng.normal(np.log(250_000), 0.4, size=n)), -3)
    return Points(np.array([f"a{i}" for i in range(n)], dtype=object), lat, lon, price,
                  np.array([f"C{c}" for c in city], dtype=object))


def check_blocking_oracle(bench=None, instances: int = 20, n: int = 2000, seed: int = 0) -> tuple:
    rng = np.random.default_rng(seed)
    mismatched, total = 0, 0
    for _ in range(instances):
        pts = random_points(n, rng)
        ia, ib, _ = candidate_index_pairs(pts)
        ja, jb, _ = brute_force_index_pairs(pts)
        grid = set(zip(ia.tolist(), ib.tolist()))
        brute = set(zip(ja.tolist(), jb.tolist()))
        mismatched += grid != brute
        total += len(brute)
    return mismatched == 0, f"{instances} instances of {n} ads, {total} pairs, {mismatched} mismatched"


def small_sample(seed: int = 3):
    cfg = replace(GeneratorConfig(), entries_per_week=12.0, weeks=6, burn_in_weeks=0)
    d = generate(cfg, seed)
    X, y, _ = stream_pairs(d.snapshots, d.truth.ad_unit)
    return X, y


def check_evaluation_harness(bench=None, repetitions: int = 100) -> tuple:
    fixtures = {(9, 1, 1): (0.9, 0.9, 0.9), (8, 2, 0): (0.8, 1.0, 2 * 0.8 / 1.8),
                (0, 0, 4): (1.0, 0.0, 0.0), (3, 0, 1): (1.0, 0.75, 1.5 / 1.75)}
    exact = all(precision_recall_f(*k) == v for k, v in fixtures.items())
    X, y = small_sample()
    a = evaluate_monte_carlo(X, y, repetitions=repetitions, seed=11)
    b = evaluate_monte_carlo(X, y, repetitions=repetitions, seed=11)
    same = a.per_repetition == b.per_repetition and len(a.per_repetition) == repetitions
    ok = exact and same
    return ok, (f"confusion fixtures exact={exact}; R={repetitions} 90/10 splits repeat identically={same}; "
                f"P={a.precision:.3f} R={a.recall:.3f} F={a.f_measure:.3f} on {len(y)} pairs")


def check_dedup_quality(bench: Benchmark) -> tuple:
    r = bench.stream
    elapsed = bench.timings["model"] + bench.timings["stream"]
    s = score(r.state.partition(), bench.data.truth)
    shares = bench.data.truth.shares()
    ratio_gap = abs(s.unit_ratio - s.true_unit_ratio)
    ok = s.precision >= 0.90 and s.recall >= 0.85 and ratio_gap <= 0.05 and elapsed < 300
    return ok, (f"P={s.precision:.4f} R={s.recall:.4f} F={s.f_measure:.4f} units/ads={s.unit_ratio:.4f} "
                f"true={s.true_unit_ratio:.4f} shares={tuple(round(float(x), 3) for x in shares)} "
                f"train+dedup={elapsed:.0f}s")


def coexisting_config(config: GeneratorConfig) -> GeneratorConfig:
    """Duplicates only from multi-agency mandates posted on the same day."""
    return replace(config, repost_rate=0.0, turnover_rate=0.0)


def _canonical(parts) -> list:
    return sorted(sorted(p) for p in parts)


def check_time_machine(bench: Benchmark, coexisting_scale: float = 0.5) -> tuple:
    model = bench.model
    cfg = replace(coexisting_config(bench.case.config),
                  entries_per_week=bench.case.config.entries_per_week * coexisting_scale)
    co = generate(cfg, bench.case.seed + 1)
    params = replace(bench.case.dedup, apply_filters=False)
    inc = run_stream(co.snapshots, model, params)
    bat = batch_clusters(assemble_ads(co.snapshots).values(), model, params)
    a, b = _canonical(inc.state.partition()), _canonical(bat)
    differ = len({tuple(p) for p in a} ^ {tuple(p) for p in b})

    gen = bench.stream
    gb = batch_clusters(assemble_ads(bench.data.snapshots).values(), model, params)
    n_inc, n_bat = len(gen.state.partition()), len(gb)
    gap = abs(n_inc - n_bat) / n_bat
    violations = len(merge_violations(gen.state.audit)) + len(merge_violations(inc.state.audit))
    ok = a == b and gap <= 0.02 and violations == 0
    return ok, (f"co-existing stream: {len(a)} vs {len(b)} units, {differ} clusters differ; "
                f"general stream: {n_inc} vs {n_bat} units ({100 * gap:.2f}%); merge violations={violations}")


def check_ols_oracles(bench=None, instances: int = 50, seed: int = 0) -> tuple:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(40, 200))
        df = pd.DataFrame({
            "x1": rng.normal(size=n), "x2": rng.normal(size=n),
            "g": rng.integers(0, int(rng.integers(2, 8)), size=n).astype(str),
            "h": rng.integers(0, int(rng.integers(2, 6)), size=n).astype(str),
        })
        df["y"] = 1.5 * df["x1"] - 0.7 * df["x2"] + rng.normal(size=n) + df["g"].astype(int) * 0.3
        res = fit_ols_fe(df, "y", ["x1", "x2"], fe=["g", "h"])
        D = pd.get_dummies(df[["g", "h"]].astype("category"), drop_first=False).to_numpy(float)
        Xd = np.column_stack([df[["x1", "x2"]].to_numpy(), D])
        # dense least squares on the full dummy set (minimum-norm solution; slopes are identified)
        coef = np.linalg.lstsq(Xd, df["y"].to_numpy(), rcond=None)[0]
        worst = max(worst, float(np.max(np.abs(coef[:2] - res.coef))))
    # 2x2 logit against closed-form log odds
    counts = {(0, 0): 40, (0, 1): 25, (1, 0): 15, (1, 1): 35}
    rows = [(x, y) for (x, y), c in counts.items() for _ in range(c)]
    lf = pd.DataFrame(rows, columns=["x", "y"])
    lr = fit_logit(lf, "y", ["x"])
    const = np.log(counts[(0, 1)] / counts[(0, 0)])
    slope = np.log(counts[(1, 1)] / counts[(1, 0)]) - const
    logit_err = max(abs(lr["const"] - const), abs(lr["x"] - slope))
    # rescaling one regressor
    df = pd.DataFrame({"x1": rng.normal(size=300), "x2": rng.normal(size=300),
                       "g": rng.integers(0, 5, size=300).astype(str)})
    df["y"] = df["x1"] + 2 * df["x2"] + rng.normal(size=300)
    base = fit_ols_fe(df, "y", ["x1", "x2"], fe=["g"])
    scaled = fit_ols_fe(df.assign(x1=df["x1"] * 7.0), "y", ["x1", "x2"], fe=["g"])
    scale_err = max(abs(scaled["x1"] * 7.0 - base["x1"]), abs(scaled["x2"] - base["x2"]))
    ok = worst < 1e-8 and logit_err < 1e-6 and scale_err < 1e-12
    return ok, f"OLS max diff {worst:.1e} over {instances}; logit {logit_err:.1e}; rescale {scale_err:.1e}"


def check_bias_mechanism(bench: Benchmark) -> tuple:
    p = bench.panel
    t = time.perf_counter()
    r2, r3 = models.model_eq2(p), models.model_eq3(p)
    elapsed = time.perf_counter() - t + bench.timings["panel"]
    tc, tp = r2.tstat("CLICKS_lag1"), r2.tstat("PRICE_lag1")
    b0, bm1 = r3["CLICKS_0"], r3["CLICKS_m1"]
    ok = tc < -2 and tp > 2 and b0 > 0 and bm1 < 0 and elapsed < 180
    return ok, (f"eq2 clicks t={tc:.2f} price t={tp:.2f}; eq3 b0={b0:.4f} (t={r3.tstat('CLICKS_0'):.1f}) "
                f"b-1={bm1:.4f} (t={r3.tstat('CLICKS_m1'):.1f}); n={r2.n_obs}")


def check_elasticity_recovery(bench: Benchmark) -> tuple:
    p = bench.panel
    rt, rp = models.model_tom(p), models.model_priceref(p)
    beta = rt["log_ONLINT"]
    odds = float(np.exp(0.01 * rp["ONLINT2"]))
    ok = -0.7 <= beta <= -0.5 and 0.85 <= odds <= 0.91
    return ok, (f"TOM elasticity {beta:.3f} (se {rt.stderr('log_ONLINT'):.3f}, n={rt.n_obs}); "
                f"revision odds ratio {odds:.4f} (n={rp.n_obs})")


def composition_rows(n: int = 2000, seed: int = 0, area_shift: float = 40.0, area_coef: float = 0.002):
    """Two periods with identical quality prices; homes are larger in the second.

    ``PRICE_DGP`` is each home's price without the idiosyncratic noise.
    """
    rng = np.random.default_rng(seed)
    zones = np.array([f"C0:Z{k}" for k in range(5)])
    zone_fx = dict(zip(zones, np.log(np.array([2000, 2500, 3000, 3500, 4000.0]))))
    frames = []
    for k, period in enumerate(("2016Q1", "2016Q2")):
        z = zones[rng.integers(0, len(zones), size=n)]
        area = rng.normal(80 + area_shift * k, 15, size=n).clip(25)
        baths = rng.integers(1, 4, size=n).astype(float)
        mean_logp = np.array([zone_fx[v] for v in z]) + area_coef * area + 0.05 * baths
        frames.append(pd.DataFrame({"zone": z, "city": "C0", "period": period, "floor_area": area,
                                    "bathrooms": baths, "PRICE": np.exp(mean_logp + rng.normal(0, 0.05, size=n)),
                                    "PRICE_DGP": np.exp(mean_logp)}))
    return pd.concat(frames, ignore_index=True)


def check_hedonic_index(bench=None) -> tuple:
    rows = composition_rows()
    doubled = rows[rows["period"] == "2016Q1"].copy()
    doubled_2 = doubled.assign(period="2016Q2", PRICE=doubled["PRICE"] * 2.0)
    idx2 = hedonic_index(pd.concat([doubled, doubled_2]), controls=("floor_area", "bathrooms"))
    doubling_ok = abs(idx2.values[1] - 200.0) <= 0.1 and idx2.values[0] == 100.0
    idx = hedonic_index(rows, controls=("floor_area", "bathrooms"))
    raw = rows.groupby("period")["PRICE"].mean()
    raw_move = 100.0 * raw["2016Q2"] / raw["2016Q1"]
    # oracle: the pricing rule applied to each period's realised homes, noise left out
    dgp = rows.groupby("period")["PRICE_DGP"].mean()
    oracle = 100.0 * dgp["2016Q2"] / dgp["2016Q1"]
    flat_ok = abs(idx.values[1] - 100.0) <= 1.0 and abs(raw_move - oracle) <= 1.0
    return doubling_ok and flat_ok, (f"doubling -> {idx2.values[1]:.4f}; composition shift -> hedonic "
                                     f"{idx.values[1]:.3f}, raw mean {raw_move:.2f} (oracle {oracle:.2f})")


def check_discount_identity(bench=None, seed: int = 0) -> tuple:
    d = implied_discount([100.0, 90.2], [100.0, 94.0], 0.12)
    change = 100.0 * (d[1] - d[0])
    rng = np.random.default_rng(seed)
    worst = 0.0
    for literal in (False, True):
        for _ in range(200):
            n = int(rng.integers(2, 20))
            a = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.03, size=n)))
            s = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.03, size=n)))
            a[0] = s[0] = 100.0
            d0 = float(rng.uniform(0, 0.3))
            back = implied_sale(a, implied_discount(a, s, d0, literal), d0, s[0], literal)
            worst = max(worst, float(np.max(np.abs(back - s) / s)))
    ok = abs(change - (-4.4)) <= 1.0 and worst <= 1e-13
    return ok, f"cumulative change {change:.2f}pp vs survey -4.4pp; round-trip max rel error {worst:.1e}"


def check_validation(bench: Benchmark) -> tuple:
    rep = validation_stats(bench.panel, bench.data.external)
    ok = rep.delistings_sales_corr > 0.9
    return ok, (f"delistings vs sales r={rep.delistings_sales_corr:.4f} over {rep.n_city_quarters} city-quarters; "
                f"zone prices r={rep.zone_price_corr:.3f}; mean discount {rep.mean_discount:.3f}")


# --- suites -------------------------------------------------------------------


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    check: Callable
    budget: Optional[float]
    needs_benchmark: bool = False


CRITERIA = (
    Criterion(1, "worked example", check_worked_example, 1.0),
    Criterion(2, "blocking oracle", check_blocking_oracle, 30.0),
    Criterion(3, "evaluation harness", check_evaluation_harness, 300.0),
    Criterion(4, "dedup quality", check_dedup_quality, None, True),
    Criterion(5, "time-machine consistency", check_time_machine, None, True),
    Criterion(6, "regression oracles", check_ols_oracles, 60.0),
    Criterion(7, "bias mechanism", check_bias_mechanism, None, True),
    Criterion(8, "elasticity recovery", check_elasticity_recovery, None, True),
    Criterion(9, "hedonic index", check_hedonic_index, 30.0),
    Criterion(10, "discount identity", check_discount_identity, 5.0),
    Criterion(11, "validation statistics", check_validation, None, True),
)

SUITES = {
    "acceptance": tuple(c.number for c in CRITERIA),
    "quick": tuple(c.number for c in CRITERIA if not c.needs_benchmark),
    "empty": (),
}


def run_criterion(number: int, bench: Optional[Benchmark] = None) -> CriterionResult:
    c = next(c for c in CRITERIA if c.number == number)
    if c.needs_benchmark and bench is None:
        bench = Benchmark()
    t = time.perf_counter()
    try:
        ok, detail = c.check(bench)
    except Exception as exc:  # a crash is a failed criterion, reported like any other
        ok, detail = False, f"error: {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t
    if c.budget is not None and elapsed > c.budget:
        ok, detail = False, f"{detail}; over budget {elapsed:.1f}s > {c.budget:.0f}s"
    return CriterionResult(c.number, c.name, bool(ok), detail, elapsed, c.budget)


def run_acceptance(suite: str = "acceptance", bench: Optional[Benchmark] = None) -> list:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    numbers = SUITES[suite]
    if bench is None and any(c.needs_benchmark for c in CRITERIA if c.number in numbers):
        bench = Benchmark()
    return [run_criterion(n, bench) for n in numbers]


def format_report(results, sep: str = "\t") -> str:
    lines = [sep.join(["criterion", "name", "result", "seconds", "budget", "detail"])]
    for r in results:
        lines.append(sep.join([str(r.number), r.name, "PASS" if r.passed else "FAIL", f"{r.seconds:.2f}",
                               "" if r.budget is None else f"{r.budget:.0f}", r.detail]))
    return "\n".join(lines)
