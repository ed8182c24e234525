"""Experiment orchestration: configs, repeated sample paths, aggregation.

An experiment fixes a market, an input model, a horizon, and a base seed,
then runs the auction dynamics over `paths` independently sampled arrival
sequences. Each path is scored against the hindsight dual of its realized
sequence, the reference-distribution dual shared by all paths, and the
proportional-share baseline. Curves are aggregated into means and standard
errors and written as plot-ready CSV plus a JSON summary. The whole run is
reproducible bit for bit from (config, base_seed); only the JSON summary
carries wall-clock provenance.
"""

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .eg import equilibrium_utilities, hindsight_solution, market_problem, solve_dual
from .errors import ConfigError, GridMismatch, InvalidRank, NoConvergence
from .inputs import (
    CorruptionSchedule,
    InputModel,
    model_from_dict,
    random_corrupted_model,
    random_iid_model,
    random_markov_model,
    random_periodic_model,
    reference_distribution,
    sample_sequence,
)
from .market import (
    MarketInstance,
    ReferenceDistribution,
    market_from_dict,
    normalize_valuations,
)
from .metrics import METRIC_NAMES, MetricSeries, build_metric_series, recording_grid
from .pace import run_pace
from .prng import derive_path_seed, make_generator

CONFIG_SCHEMA = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; `raw` keeps the original document."""

    market: dict
    model: dict
    t: int
    paths: int
    delta0: float
    base_seed: int
    dense_until: int
    grid_factor: float
    out_dir: Optional[str]
    raw: dict = field(repr=False)


def config_from_dict(doc: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(f"config schema must be {CONFIG_SCHEMA}")
    try:
        market = doc["market"]
        model = doc["model"]
        t = int(doc["t"])
        paths = int(doc["paths"])
    except KeyError as exc:
        raise ConfigError(f"config missing required field {exc}") from exc
    if t < 1 or paths < 1:
        raise ConfigError("t and paths must be positive")
    if "path" in market and base_dir is not None:
        resolved = (base_dir / market["path"]).resolve()
        if not resolved.exists():
            raise ConfigError(f"market file not found: {resolved}")
        market = {**market, "path": str(resolved)}
    grid = doc.get("grid", {})
    return ExperimentConfig(
        market=market,
        model=model,
        t=t,
        paths=paths,
        delta0=float(doc.get("delta0", 1.0)),
        base_seed=int(doc.get("base_seed", 0)),
        dense_until=int(grid.get("dense_until", 100)),
        grid_factor=float(grid.get("factor", 1.1)),
        out_dir=doc.get("out"),
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc, base_dir=path.parent)


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def generate_market(
    n: int,
    m: int,
    rank: int = 10,
    noise: float = 0.1,
    seed: int = 0,
    ref: Optional[ReferenceDistribution] = None,
) -> MarketInstance:
    """Low-rank-plus-noise valuations, rows normalized against a reference.

    Factors and noise are uniform on [0, 1) (noise shifted to mean zero);
    negatives clip to zero. A row left without positive expected value under
    the reference is redrawn. Defaults to the uniform reference.
    """
    if not 1 <= rank <= min(n, m):
        raise InvalidRank(f"rank must lie in [1, {min(n, m)}]")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if ref is None:
        ref = ReferenceDistribution(np.full(m, 1.0 / m))
    rng = make_generator(seed)
    A = rng.random((n, rank))
    B = rng.random((m, rank))
    E = rng.random((n, m)) - 0.5
    V = np.maximum(0.0, A @ B.T + noise * E)
    for _ in range(100):
        bad = np.flatnonzero(V @ ref.probs <= 0)
        if bad.size == 0:
            break
        A_new = rng.random((bad.size, rank))
        E_new = rng.random((bad.size, m)) - 0.5
        V[bad] = np.maximum(0.0, A_new @ B.T + noise * E_new)
    else:
        raise ValueError("could not draw a market with positive rows")
    return MarketInstance(normalize_valuations(V, ref))


def resolve_model(config: ExperimentConfig) -> InputModel:
    """Build the input model: explicit arrays or random generation directives."""
    doc = config.model
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("model spec must be an object with a 'kind'")
    kind = doc["kind"]
    if "random" in doc:
        directive = doc["random"]
        try:
            m = int(directive["m"])
            seed = int(directive.get("seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad random model directive: {exc}") from exc
        if kind == "iid":
            return random_iid_model(m, seed)
        if kind == "corrupted":
            c = doc.get("corruption", {"kind": "decaying"})
            schedule = CorruptionSchedule(
                kind=c.get("kind", "decaying"),
                scale=float(c.get("scale", 1.0)),
                target=float(c.get("target", 0.0)),
            )
            return random_corrupted_model(m, schedule, seed)
        if kind == "markov":
            return random_markov_model(m, seed)
        if kind == "periodic":
            return random_periodic_model(m, int(directive["q"]), seed)
        raise ConfigError(f"unknown model kind {kind!r}")
    try:
        return model_from_dict(doc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad model spec: {exc}") from exc


def resolve_market(config: ExperimentConfig, ref: ReferenceDistribution) -> MarketInstance:
    """Load or synthesize the market, normalized against the model reference."""
    doc = config.market
    if not isinstance(doc, dict):
        raise ConfigError("market spec must be an object")
    if "path" in doc:
        path = Path(doc["path"])
        if not path.exists():
            raise ConfigError(f"market file not found: {path}")
        instance = market_from_dict(json.loads(path.read_text()))
        return MarketInstance(
            normalize_valuations(instance.valuations, ref), instance.budgets
        )
    if "generator" in doc:
        g = doc["generator"]
        try:
            return generate_market(
                n=int(g["n"]),
                m=int(g["m"]),
                rank=int(g.get("rank", 10)),
                noise=float(g.get("noise", 0.1)),
                seed=int(g.get("seed", 0)),
                ref=ref,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad market generator spec: {exc}") from exc
    raise ConfigError("market spec needs either 'path' or 'generator'")


@dataclass(frozen=True)
class AggregateReport:
    """Across-path means and standard errors on the shared grid."""

    times: np.ndarray
    means: Dict[str, np.ndarray]
    stderrs: Optional[Dict[str, np.ndarray]]
    paths: int
    provenance: Dict[str, object] = field(default_factory=dict)

    def terminal(self) -> Dict[str, Dict[str, Optional[float]]]:
        out = {}
        for name, mean in self.means.items():
            err = None if self.stderrs is None else float(self.stderrs[name][-1])
            out[name] = {"mean": float(mean[-1]), "stderr": err}
        return out


def summarize(series_list: Sequence[MetricSeries]) -> AggregateReport:
    """Arithmetic mean and sample-sd / sqrt(paths) standard error per point.

    The standard error is reported absent (None) for a single path.
    """
    if not series_list:
        raise GridMismatch("cannot summarize an empty collection")
    times = series_list[0].times
    names = sorted(series_list[0].values)
    for s in series_list[1:]:
        if not np.array_equal(s.times, times) or sorted(s.values) != names:
            raise GridMismatch("series disagree on times or metric names")
    k = len(series_list)
    means = {}
    stderrs = {} if k > 1 else None
    for name in names:
        stack = np.stack([s.values[name] for s in series_list])
        means[name] = stack.mean(axis=0)
        if k > 1:
            stderrs[name] = stack.std(axis=0, ddof=1) / np.sqrt(k)
    return AggregateReport(times=times, means=means, stderrs=stderrs, paths=k)


def _run_path(args) -> MetricSeries:
    (instance, model, t, delta0, grid, path_index, path_seed, hs_tol, star_refs) = args
    seq = sample_sequence(model, t, path_seed)
    trace = run_pace(instance, seq, delta0, record_times=grid)
    hs = hindsight_solution(instance, seq, delta0, tol=hs_tol)
    if not hs.converged:
        raise NoConvergence(
            f"hindsight solve failed on path {path_index} (seed {path_seed}): "
            f"residual {hs.residual:.3g}"
        )
    hs_u = equilibrium_utilities(hs, instance.n)
    star_beta, star_u = star_refs
    return build_metric_series(
        trace,
        instance,
        seq,
        hs.beta_hat,
        hs_u,
        star_beta,
        star_u,
        metadata={
            "model": model.kind,
            "path_id": path_index,
            "path_seed": path_seed,
            "n": instance.n,
            "m": instance.m,
            "delta0": delta0,
        },
    )


def run_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    out_dir: Optional[str] = None,
    path_seeds: Optional[Sequence[int]] = None,
    solver_tol: float = 1e-8,
) -> AggregateReport:
    """Run all paths, aggregate, and optionally write CSV and JSON outputs.

    path_seeds overrides the derived per-path seeds (a test hook). A failed
    path aborts the whole experiment with its path and seed in the message.
    """
    started = time.time()
    model = resolve_model(config)
    ref = reference_distribution(model)
    instance = resolve_market(config, ref)
    star = solve_dual(market_problem(instance, ref, config.delta0), tol=solver_tol)
    if not star.converged:
        raise NoConvergence(
            f"reference solve failed: residual {star.residual:.3g}"
        )
    star_u = equilibrium_utilities(star, instance.n)
    grid = recording_grid(config.t, config.dense_until, config.grid_factor)
    if path_seeds is None:
        seeds = [derive_path_seed(config.base_seed, p) for p in range(config.paths)]
    else:
        if len(path_seeds) != config.paths:
            raise ConfigError("path_seeds must provide one seed per path")
        seeds = [int(s) for s in path_seeds]
    jobs = [
        (
            instance,
            model,
            config.t,
            config.delta0,
            grid,
            p,
            seeds[p],
            solver_tol,
            (star.beta_hat, star_u),
        )
        for p in range(config.paths)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            series_list = list(pool.map(_run_path, jobs))
    else:
        series_list = [_run_path(job) for job in jobs]
    aggregated = summarize(series_list)
    report = AggregateReport(
        times=aggregated.times,
        means=aggregated.means,
        stderrs=aggregated.stderrs,
        paths=aggregated.paths,
        provenance={
            "config": config.raw,
            "config_hash": config_hash(config.raw),
            "base_seed": config.base_seed,
            "path_seeds": seeds,
            "model_kind": model.kind,
            "n": instance.n,
            "m": instance.m,
            "version": __version__,
            "wall_clock_s": time.time() - started,
        },
    )
    target = out_dir or config.out_dir
    if target is not None:
        write_outputs(Path(target), model.kind, series_list, report)
    return report


def write_paths_csv(path, model_kind: str, series_list: Sequence[MetricSeries]) -> None:
    """One row per (path, metric, time): model,path_id,metric,t,value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "path_id", "metric", "t", "value"])
        for series in series_list:
            path_id = series.metadata.get("path_id", 0)
            for name in METRIC_NAMES:
                vals = series.values[name]
                for tau, v in zip(series.times, vals):
                    writer.writerow([model_kind, path_id, name, int(tau), repr(float(v))])


def write_aggregate_csv(path, model_kind: str, report: AggregateReport) -> None:
    """One row per (metric, time): model,metric,t,mean,stderr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric", "t", "mean", "stderr"])
        for name in METRIC_NAMES:
            means = report.means[name]
            for k, tau in enumerate(report.times):
                err = "" if report.stderrs is None else repr(float(report.stderrs[name][k]))
                writer.writerow([model_kind, name, int(tau), repr(float(means[k])), err])


def write_outputs(
    out_dir: Path,
    model_kind: str,
    series_list: Sequence[MetricSeries],
    report: AggregateReport,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_paths_csv(out_dir / "paths.csv", model_kind, series_list)
    write_aggregate_csv(out_dir / "aggregate.csv", model_kind, report)
    summary = {
        "provenance": report.provenance,
        "terminal": report.terminal(),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))


def read_paths_csv(path) -> List[MetricSeries]:
    """Parse a per-path CSV back into one series per path."""
    rows: Dict[int, Dict[str, Dict[int, float]]] = {}
    model_kinds = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            model_kinds.add(row["model"])
            pid = int(row["path_id"])
            rows.setdefault(pid, {}).setdefault(row["metric"], {})[int(row["t"])] = float(
                row["value"]
            )
    series_list = []
    for pid in sorted(rows):
        metrics = rows[pid]
        times = np.asarray(sorted(next(iter(metrics.values()))), dtype=np.int64)
        values = {}
        for name, by_t in metrics.items():
            if sorted(by_t) != times.tolist():
                raise GridMismatch(f"path {pid} metric {name} has a different grid")
            values[name] = np.asarray([by_t[int(tau)] for tau in times])
        series_list.append(
            MetricSeries(times=times, values=values, metadata={"path_id": pid})
        )
    if not series_list:
        raise ConfigError(f"no rows found in {path}")
    return series_list
