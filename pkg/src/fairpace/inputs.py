"""Item-arrival models and their nonstationarity diagnostics.

Four arrival processes over a finite item universe:

  iid        independent draws from a fixed base distribution
  corrupted  independent draws whose per-step distributions drift away from
             the base under a corruption schedule
  markov     a time-homogeneous finite chain started from the base
  periodic   fixed-length blocks; one draw per within-block position
             distribution, shuffled uniformly inside each block

A model owns a model-level seed that drives distribution-level randomness
(the corruption perturbations), so the per-step marginals are a property of
the model and shared by all sample paths. Item draws come from an explicit
per-path seed, so distinct paths are independent and any (model, horizon,
path seed) triple reproduces bit-identically. Longer horizons extend
shorter ones: the first t draws of a horizon-t' > t sequence equal the
horizon-t sequence.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .errors import InvalidHorizon, LengthMismatch, NoConvergence
from .market import ItemSequence, ReferenceDistribution
from .prng import categorical_cdf, make_generator, sample_categorical

KINDS = ("iid", "corrupted", "markov", "periodic")


@dataclass(frozen=True)
class CorruptionSchedule:
    """Rule producing the per-step distributions of a corrupted model.

    decaying  adds a per-coordinate uniform perturbation of amplitude
              scale/step to the base and renormalizes, so the drift at step
              tau is of order 1/tau and the average corruption vanishes
              with the horizon.
    budgeted  mixes the base toward one random item corner per step, with
              the mixing weight chosen so that every step sits exactly
              `target` away from the base in total variation; the average
              corruption then equals `target` exactly.
    """

    kind: str
    scale: float = 1.0
    target: float = 0.0

    def __post_init__(self):
        if self.kind not in ("decaying", "budgeted"):
            raise ValueError(f"unknown corruption schedule kind {self.kind!r}")
        if self.kind == "decaying" and self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if self.kind == "budgeted" and not 0.0 <= self.target < 1.0:
            raise ValueError("target must lie in [0, 1)")


def _row_stochastic(matrix, name: str) -> np.ndarray:
    arr = np.array(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} entries must be finite and nonnegative")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError(f"{name} rows must sum to 1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class InputModel:
    """Tagged description of an arrival process over m items."""

    kind: str
    base: Optional[ReferenceDistribution] = None
    transition: Optional[np.ndarray] = None
    period_dists: Optional[np.ndarray] = None
    corruption: Optional[CorruptionSchedule] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown input model kind {self.kind!r}")
        if self.kind in ("iid", "corrupted", "markov"):
            if self.base is None:
                raise ValueError(f"{self.kind} model requires a base distribution")
        if self.kind == "corrupted" and self.corruption is None:
            raise ValueError("corrupted model requires a corruption schedule")
        if self.kind == "markov":
            if self.transition is None:
                raise ValueError("markov model requires a transition matrix")
            tr = _row_stochastic(self.transition, "transition")
            if tr.shape[0] != tr.shape[1]:
                raise ValueError("transition matrix must be square")
            if tr.shape[0] != self.base.m:
                raise ValueError("transition size must match the base distribution")
            object.__setattr__(self, "transition", tr)
        if self.kind == "periodic":
            if self.period_dists is None:
                raise ValueError("periodic model requires per-position distributions")
            pd = _row_stochastic(self.period_dists, "period_dists")
            if pd.shape[0] < 1:
                raise ValueError("period length must be at least 1")
            object.__setattr__(self, "period_dists", pd)

    @property
    def m(self) -> int:
        if self.kind == "periodic":
            return self.period_dists.shape[1]
        return self.base.m

    @property
    def q(self) -> int:
        """Period length; 1 for the memoryless kinds."""
        return self.period_dists.shape[0] if self.kind == "periodic" else 1


def iid_model(base, seed: int = 0) -> InputModel:
    return InputModel("iid", base=_as_reference(base), seed=seed)


def corrupted_model(base, corruption: CorruptionSchedule, seed: int = 0) -> InputModel:
    return InputModel("corrupted", base=_as_reference(base), corruption=corruption, seed=seed)


def markov_model(transition, base, seed: int = 0) -> InputModel:
    return InputModel("markov", base=_as_reference(base), transition=transition, seed=seed)


def periodic_model(period_dists, seed: int = 0) -> InputModel:
    return InputModel("periodic", period_dists=period_dists, seed=seed)


def _as_reference(dist) -> ReferenceDistribution:
    if isinstance(dist, ReferenceDistribution):
        return dist
    return ReferenceDistribution(np.asarray(dist, dtype=np.float64))


def _as_prob_array(dist) -> np.ndarray:
    if isinstance(dist, ReferenceDistribution):
        return dist.probs
    return np.asarray(dist, dtype=np.float64)


def tv_distance(p, q) -> float:
    """Total variation distance, half the L1 distance between the vectors."""
    pa = _as_prob_array(p)
    qa = _as_prob_array(q)
    if pa.shape != qa.shape:
        raise LengthMismatch(f"length {pa.size} vs {qa.size}")
    return 0.5 * float(np.abs(pa - qa).sum())


def corruption_step_distributions(model: InputModel, t: int) -> np.ndarray:
    """Per-step marginals s^1..s^t of a corrupted model, one row per step.

    Deterministic in (model.seed, t) and prefix-stable in t.
    """
    if model.kind != "corrupted":
        raise ValueError("only corrupted models have a corruption schedule")
    base = model.base.probs
    sched = model.corruption
    rng = make_generator(model.seed)
    if sched.kind == "decaying":
        eps = sched.scale / np.arange(1, t + 1, dtype=np.float64)
        raw = base[None, :] + eps[:, None] * rng.random((t, base.size))
        return raw / raw.sum(axis=1, keepdims=True)
    if sched.target == 0.0:
        return np.tile(base, (t, 1))
    headroom = 1.0 - base
    feasible = np.flatnonzero(headroom >= sched.target)
    if feasible.size == 0:
        raise ValueError(
            f"corruption target {sched.target} exceeds the headroom of every corner"
        )
    corners = feasible[(rng.random(t) * feasible.size).astype(np.int64)]
    # mixing weight per step so that TV(s^tau, base) == target exactly
    eps = sched.target / headroom[corners]
    dists = base[None, :] * (1.0 - eps)[:, None]
    dists[np.arange(t), corners] += eps
    return dists


def sample_sequence(model: InputModel, t: int, path_seed: int) -> ItemSequence:
    """Draw a length-t item sequence from the model using the path stream."""
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise InvalidHorizon(f"horizon must be a positive integer, got {t!r}")
    t = int(t)
    rng = make_generator(path_seed)
    if model.kind == "iid":
        items = sample_categorical(categorical_cdf(model.base.probs), rng.random(t))
    elif model.kind == "corrupted":
        dists = corruption_step_distributions(model, t)
        cdfs = np.cumsum(dists, axis=1)
        cdfs[:, -1] = 1.0
        # row-wise inverse CDF with lower-index ties, one uniform per step
        items = (cdfs < rng.random(t)[:, None]).sum(axis=1)
    elif model.kind == "markov":
        u = rng.random(t)
        row_cdfs = np.cumsum(model.transition, axis=1)
        row_cdfs[:, -1] = 1.0
        items = np.empty(t, dtype=np.int64)
        state = int(sample_categorical(categorical_cdf(model.base.probs), u[0]))
        items[0] = state
        for tau in range(1, t):
            state = int(np.searchsorted(row_cdfs[state], u[tau], side="left"))
            items[tau] = state
    else:
        q, m = model.period_dists.shape
        blocks = math.ceil(t / q)
        # each block consumes q item uniforms then q shuffle keys, so the
        # stream is prefix-stable across horizons
        u = rng.random((blocks, 2 * q))
        drawn = np.empty((blocks, q), dtype=np.int64)
        for k in range(q):
            cdf = categorical_cdf(model.period_dists[k])
            drawn[:, k] = sample_categorical(cdf, u[:, k])
        # uniform within-block shuffle via random sort keys
        order = np.argsort(u[:, q:], axis=1)
        items = np.take_along_axis(drawn, order, axis=1).reshape(-1)[:t]
    return ItemSequence(items.astype(np.int64))


def stationary_distribution(transition, tol: float = 1e-12, max_iters: int = 100_000) -> ReferenceDistribution:
    """Fixed point of the chain by power iteration from the uniform vector.

    Returns a vector pi with ||pi P - pi||_1 <= tol. Raises NoConvergence if
    the cap is hit, which signals a periodic or reducible chain. Reducible
    chains whose uniform vector happens to be a fixed point (for example the
    identity transition) converge immediately to uniform; that degenerate
    acceptance is by design.
    """
    P = _row_stochastic(transition, "transition")
    if P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iters):
        nxt = pi @ P
        if np.abs(nxt - pi).sum() <= tol:
            return ReferenceDistribution(pi)
        pi = nxt / nxt.sum()
    raise NoConvergence(
        f"power iteration did not reach tol={tol} in {max_iters} iterations"
    )


def reference_distribution(model: InputModel, tol: float = 1e-12) -> ReferenceDistribution:
    """The model's long-run item distribution.

    The base for iid and corrupted models, the stationary distribution for
    markov models, and the per-period average for periodic models.
    """
    if model.kind in ("iid", "corrupted"):
        return model.base
    if model.kind == "markov":
        return stationary_distribution(model.transition, tol=tol)
    avg = model.period_dists.mean(axis=0)
    return ReferenceDistribution(avg / avg.sum())


def _markov_marginals(model: InputModel, t: int) -> np.ndarray:
    """Rows are the step marginals base @ P^(tau-1) for tau = 1..t."""
    marginals = np.empty((t, model.m))
    q = model.base.probs.copy()
    marginals[0] = q
    for tau in range(1, t):
        q = q @ model.transition
        marginals[tau] = q
    return marginals


def average_marginal(model: InputModel, t: int) -> ReferenceDistribution:
    """The exact average (1/t) sum of the per-step item marginals.

    For periodic models the within-block shuffle makes every position's
    marginal equal to the per-period average, so the result is that average
    for every horizon, including horizons that truncate the final block.
    """
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise InvalidHorizon(f"horizon must be a positive integer, got {t!r}")
    t = int(t)
    if model.kind == "iid":
        return model.base
    if model.kind == "corrupted":
        avg = corruption_step_distributions(model, t).mean(axis=0)
    elif model.kind == "markov":
        avg = _markov_marginals(model, t).mean(axis=0)
    else:
        avg = model.period_dists.mean(axis=0)
    return ReferenceDistribution(avg / avg.sum())


@dataclass(frozen=True)
class NonstationarityReport:
    """Computable deviation measures of a model over a finite horizon.

    delta_avg is the average per-step total variation between the step
    marginal and the model reference. epsilon_of_iota maps a step offset to
    the worst-case distance from stationarity after that many transitions
    (markov only). delta_block is the length-weighted block-average
    deviation from the per-period average (periodic only).
    """

    delta_avg: float
    epsilon_of_iota: Optional[Dict[int, float]] = None
    delta_block: Optional[float] = None

    def __post_init__(self):
        values = [self.delta_avg]
        if self.epsilon_of_iota:
            values.extend(self.epsilon_of_iota.values())
        if self.delta_block is not None:
            values.append(self.delta_block)
        if any(not 0.0 <= v <= 1.0 + 1e-12 for v in values):
            raise ValueError("deviation measures must lie in [0, 1]")


def nonstationarity_report(model: InputModel, t: int, iota_grid=()) -> NonstationarityReport:
    """Exact nonstationarity measures of the model's first t marginals."""
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise InvalidHorizon(f"horizon must be a positive integer, got {t!r}")
    t = int(t)
    if model.kind == "iid":
        return NonstationarityReport(delta_avg=0.0)
    if model.kind == "corrupted":
        dists = corruption_step_distributions(model, t)
        deltas = 0.5 * np.abs(dists - model.base.probs[None, :]).sum(axis=1)
        return NonstationarityReport(delta_avg=float(deltas.mean()))
    if model.kind == "markov":
        pi = reference_distribution(model).probs
        marginals = _markov_marginals(model, t)
        delta_avg = float(0.5 * np.abs(marginals - pi[None, :]).sum(axis=1).mean())
        eps: Dict[int, float] = {}
        power = np.eye(model.m)
        reached = 0
        for iota in sorted(set(int(i) for i in iota_grid)):
            if iota < 1:
                raise ValueError("iota offsets must be >= 1")
            for _ in range(iota - reached):
                power = power @ model.transition
            reached = iota
            eps[iota] = float(0.5 * np.abs(power - pi[None, :]).sum(axis=1).max())
        return NonstationarityReport(delta_avg=delta_avg, epsilon_of_iota=eps or None)
    # periodic: every position's marginal is the per-period average, so both
    # the per-step and the block-wise deviations evaluate to zero
    pi = reference_distribution(model).probs
    q = model.q
    marginal = model.period_dists.mean(axis=0)
    step_dev = 0.5 * np.abs(marginal - pi).sum()
    delta_avg = float(step_dev)
    blocks = [min(q, t - start) for start in range(0, t, q)]
    delta_block = float(sum(size * step_dev for size in blocks) / t)
    return NonstationarityReport(delta_avg=delta_avg, delta_block=delta_block)


def random_base(m: int, seed: int = 0) -> ReferenceDistribution:
    """Random categorical distribution with uniform [0, 1) weights, normalized."""
    u = make_generator(seed).random(m)
    return ReferenceDistribution(u / u.sum())


def random_iid_model(m: int, seed: int = 0) -> InputModel:
    return iid_model(random_base(m, seed), seed=seed)


def random_corrupted_model(m: int, corruption: CorruptionSchedule, seed: int = 0) -> InputModel:
    return corrupted_model(random_base(m, seed), corruption, seed=seed)


def random_markov_model(m: int, seed: int = 0) -> InputModel:
    """Dense random chain (row-normalized uniforms) with a random start."""
    rng = make_generator(seed)
    raw = rng.random((m, m))
    transition = raw / raw.sum(axis=1, keepdims=True)
    start = rng.random(m)
    return markov_model(transition, ReferenceDistribution(start / start.sum()), seed=seed)


def random_periodic_model(m: int, q: int, seed: int = 0) -> InputModel:
    """q random per-position distributions (row-normalized uniforms)."""
    raw = make_generator(seed).random((q, m))
    return periodic_model(raw / raw.sum(axis=1, keepdims=True), seed=seed)


def model_to_dict(model: InputModel) -> dict:
    doc: dict = {"kind": model.kind, "seed": model.seed}
    if model.base is not None:
        doc["base"] = model.base.probs.tolist()
    if model.transition is not None:
        doc["transition"] = model.transition.tolist()
    if model.period_dists is not None:
        doc["period_dists"] = model.period_dists.tolist()
    if model.corruption is not None:
        doc["corruption"] = {
            "kind": model.corruption.kind,
            "scale": model.corruption.scale,
            "target": model.corruption.target,
        }
    return doc


def model_from_dict(doc: dict) -> InputModel:
    corruption = None
    if "corruption" in doc:
        c = doc["corruption"]
        corruption = CorruptionSchedule(
            kind=c["kind"],
            scale=c.get("scale", 1.0),
            target=c.get("target", 0.0),
        )
    return InputModel(
        kind=doc["kind"],
        base=_as_reference(doc["base"]) if "base" in doc else None,
        transition=doc.get("transition"),
        period_dists=doc.get("period_dists"),
        corruption=corruption,
        seed=int(doc.get("seed", 0)),
    )
