"""Box-constrained Eisenberg-Gale dual: objective, solver, utilities.

The dual of the equal-budget log-utility allocation program over a weighted
finite item set is

    min_beta  sum_j weights_j max_i beta_i v_ij  -  (1/n) sum_i log beta_i

over the box [1/((1+delta0) n), 1+delta0]. With empirical item frequencies
as weights the minimizer is the hindsight benchmark of a realized sequence;
with a model's reference distribution it is the underlying equilibrium.

The minimizer generically sits at a kink of the piecewise-linear term:
items whose best bids tie between agents are exactly the items a market
equilibrium splits between them, so single-winner subgradient steps cannot
settle there. The solver therefore minimizes a softmax-smoothed objective
with a decreasing temperature, each stage warm-started and solved by a
damped projected Newton method on the n multiplier variables (the Hessian
is an n x n matrix assembled in O(n m + n^2 m) work, cheap at the scales
here). The temperature floor tracks the requested tolerance; the reported
residual is the fixed-point gap ||beta - clamp(1 / (n u(beta)))||_inf
where u is the utility vector under the final temperature's tie-splitting
weights, which converges to the exact optimality certificate as the
temperature vanishes.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveBeta, NoConvergenceWarning, ZeroExpectedValue
from .market import ItemSequence, MarketInstance, ReferenceDistribution
from .pace import pacing_box


@dataclass(frozen=True)
class DualProblem:
    """Valuations, item weights summing to 1, and the multiplier box."""

    valuations: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        v = np.array(self.valuations, dtype=np.float64)
        w = np.array(self.weights, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("valuations must be a 2-d matrix")
        if w.shape != (v.shape[1],):
            raise ValueError("weights length must match the item count")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not 0.0 < self.lo < self.hi:
            raise ValueError("box must satisfy 0 < lo < hi")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "valuations", v)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.valuations.shape[0]

    @property
    def m(self) -> int:
        return self.valuations.shape[1]


def market_problem(instance: MarketInstance, weights, delta0: float = 1.0) -> DualProblem:
    """Dual problem for a market with the pacing box implied by delta0."""
    lo, hi = pacing_box(instance.n, delta0)
    w = weights.probs if isinstance(weights, ReferenceDistribution) else weights
    return DualProblem(instance.valuations, w, lo, hi)


@dataclass(frozen=True)
class DualSolution:
    """Minimizer estimate with its objective, fixed-point residual, and cost."""

    beta_hat: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool


def dual_objective(beta, prob: DualProblem) -> float:
    """Weighted winning-bid mass plus the log barrier, at a positive point."""
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta <= 0):
        raise NonpositiveBeta("dual objective requires strictly positive beta")
    winning = (beta[:, None] * prob.valuations).max(axis=0)
    return float(winning @ prob.weights - np.log(beta).sum() / prob.n)


def _smoothed_state(beta, prob: DualProblem, mu: float):
    """Softmax relaxation of the objective with gradient and share weights.

    The shares are each item's softmax tie split across agents; the implied
    utility vector feeds both the gradient and the fixed-point residual.
    """
    V = prob.valuations
    n = prob.n
    bids = beta[:, None] * V
    top = bids.max(axis=0)
    weights_exp = np.exp((bids - top) / mu)
    mass = weights_exp.sum(axis=0)
    prices = mu * np.log(mass) + top
    shares = weights_exp / mass
    utilities = (shares * V) @ prob.weights
    obj = float(prices @ prob.weights - np.log(beta).sum() / n)
    grad = utilities - 1.0 / (n * beta)
    return obj, grad, utilities, shares


def _smoothed_value(beta, prob: DualProblem, mu: float) -> float:
    V = prob.valuations
    bids = beta[:, None] * V
    top = bids.max(axis=0)
    mass = np.exp((bids - top) / mu).sum(axis=0)
    prices = mu * np.log(mass) + top
    return float(prices @ prob.weights - np.log(beta).sum() / prob.n)


def _smoothed_hessian(beta, prob: DualProblem, mu: float, shares) -> np.ndarray:
    """Exact Hessian of the smoothed objective; positive definite on the box."""
    V = prob.valuations
    n = prob.n
    scaled = shares * V  # (n, m)
    diag_term = (scaled * V) @ (prob.weights / mu)
    cross = (scaled * (prob.weights / mu)[None, :]) @ scaled.T
    H = -cross
    idx = np.arange(n)
    H[idx, idx] += diag_term + 1.0 / (n * beta**2)
    return H


def _projected_gradient(beta, grad, lo, hi) -> np.ndarray:
    pg = grad.copy()
    pg[(beta <= lo * (1 + 1e-12)) & (grad > 0)] = 0.0
    pg[(beta >= hi * (1 - 1e-12)) & (grad < 0)] = 0.0
    return pg


def _newton_stage(beta, prob: DualProblem, mu: float, gtol: float, max_steps: int):
    """Damped projected Newton on the mu-smoothed objective.

    Bound-active coordinates whose gradient points outward are frozen; the
    Newton system is solved on the free block. Steps clip to the box and
    halve until the objective strictly decreases. Near the optimum the
    improvement in stiff directions drops below floating-point resolution
    of the objective, so when no step decreases it the step is retried
    against a shrinking projected gradient norm, which lets the quadratic
    phase run down to the gradient noise floor. Returns the new point and
    the number of Newton iterations consumed.
    """
    lo, hi = prob.lo, prob.hi
    steps = 0
    obj, grad, _, shares = _smoothed_state(beta, prob, mu)
    while steps < max_steps:
        pg = _projected_gradient(beta, grad, lo, hi)
        if np.abs(pg).max() <= gtol:
            break
        free = pg != 0.0
        H = _smoothed_hessian(beta, prob, mu, shares)
        direction = np.zeros_like(beta)
        sub = H[np.ix_(free, free)]
        try:
            direction[free] = np.linalg.solve(sub, -grad[free])
        except np.linalg.LinAlgError:
            direction[free] = -grad[free]
        steps += 1
        pg_norm = float(np.sqrt((pg**2).sum()))
        accepted = None
        alpha = 1.0
        for _ in range(40):
            candidate = np.clip(beta + alpha * direction, lo, hi)
            if np.any(candidate != beta):
                state = _smoothed_state(candidate, prob, mu)
                if state[0] < obj:
                    accepted = (candidate, state)
                    break
            alpha *= 0.5
        if accepted is None:
            # objective is flat to machine precision; fall back to shrinking
            # the projected gradient itself
            alpha = 1.0
            for _ in range(40):
                candidate = np.clip(beta + alpha * direction, lo, hi)
                if np.any(candidate != beta):
                    state = _smoothed_state(candidate, prob, mu)
                    cand_pg = _projected_gradient(candidate, state[1], lo, hi)
                    if float(np.sqrt((cand_pg**2).sum())) < 0.9 * pg_norm:
                        accepted = (candidate, state)
                        break
                alpha *= 0.5
        if accepted is None:
            break
        beta, (obj, grad, _, shares) = accepted
    return beta, steps


def solve_dual(prob: DualProblem, tol: float = 1e-8, max_iters: int = 200_000) -> DualSolution:
    """Minimize the dual over the box by smoothed Newton continuation.

    The softmax temperature starts near the bid scale and decays by factors
    of ten down to the tolerance; each stage is warm-started from the last.
    The residual of the returned point certifies the fixed point under the
    final temperature's tie split; if it exceeds 10 tol a
    NoConvergenceWarning is emitted and the best iterate is still returned.
    The returned objective never exceeds the starting point's objective.
    """
    expected = prob.valuations @ prob.weights
    if np.any(expected <= 0):
        bad = np.flatnonzero(expected <= 0)
        raise ZeroExpectedValue(f"agents {bad.tolist()} have zero weighted value")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = prob.n
    init = np.full(n, prob.hi)
    init_objective = dual_objective(init, prob)
    beta = np.full(n, min(1.0, prob.hi))

    scale = float((prob.valuations * prob.weights[None, :]).sum(axis=1).max())
    mu = 0.1 * max(scale, 1e-6)
    mu_end = max(tol, 1e-12)
    gtol_final = max(tol / (n * prob.hi**2) * 0.1, 1e-13)
    iterations = 0
    ok = True
    while True:
        gtol = gtol_final if mu <= mu_end else max(1e-3 * mu, gtol_final)
        budget = max_iters - iterations
        if budget <= 0:
            ok = False
            break
        beta, used = _newton_stage(beta, prob, mu, gtol, min(budget, 200))
        iterations += used
        if mu <= mu_end:
            break
        mu = max(0.1 * mu, mu_end)

    with np.errstate(divide="ignore"):
        _, _, utilities, _ = _smoothed_state(beta, prob, mu)
        fixed_point = np.clip(1.0 / (n * utilities), prob.lo, prob.hi)
    residual = float(np.max(np.abs(beta - fixed_point)))
    objective = dual_objective(beta, prob)
    if objective > init_objective:
        beta, objective = init, init_objective
        residual = np.inf
        ok = False
    converged = ok and residual <= 10.0 * tol
    if not converged:
        warnings.warn(
            f"dual solve stopped after {iterations} iterations with residual "
            f"{residual:.3g} (tol {tol:.3g}); returning the best iterate",
            NoConvergenceWarning,
        )
    return DualSolution(
        beta_hat=beta,
        objective=objective,
        residual=residual,
        iterations=iterations,
        converged=converged,
    )


def equilibrium_utilities(solution, n: int) -> np.ndarray:
    """Average utilities implied by the dual point: u_i = 1 / (n beta_i)."""
    beta = solution.beta_hat if isinstance(solution, DualSolution) else np.asarray(solution)
    if np.any(beta <= 0):
        raise NonpositiveBeta("utilities require strictly positive beta")
    return 1.0 / (n * beta)


def hindsight_solution(
    instance: MarketInstance,
    seq: ItemSequence,
    delta0: float = 1.0,
    tol: float = 1e-8,
    max_iters: int = 200_000,
) -> DualSolution:
    """Dual optimum of the realized sequence, via its empirical frequencies."""
    weights = np.bincount(seq.items, minlength=instance.m) / seq.t
    return solve_dual(market_problem(instance, weights, delta0), tol=tol, max_iters=max_iters)


def solution_to_dict(solution: DualSolution) -> dict:
    return {
        "beta": solution.beta_hat.tolist(),
        "objective": solution.objective,
        "residual": solution.residual,
        "iterations": solution.iterations,
        "converged": solution.converged,
    }


def solution_from_dict(doc: dict) -> DualSolution:
    return DualSolution(
        beta_hat=np.asarray(doc["beta"], dtype=np.float64),
        objective=float(doc["objective"]),
        residual=float(doc["residual"]),
        iterations=int(doc.get("iterations", 0)),
        converged=bool(doc.get("converged", True)),
    )
