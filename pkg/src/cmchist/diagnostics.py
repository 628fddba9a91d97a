"""Occupation, recurrence, mixing, and sample-complexity diagnostics.

The estimation guarantees trade on a handful of chain functionals: the
running occupation measure of (state, control) sets, worst-case expected
return times, strong-mixing coefficients, a pairwise-visit intensity,
and exponential remainder terms assembled from all of them.  This
module computes each one exactly where the family allows it and by safe
surrogates where it does not, plus the sample-size predicates that
decide whether estimation is information-theoretically easy or hopeless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DiagnosticsError,
    MarkovControlsRequiredError,
    MissingFieldError,
    SetNeverVisitedError,
)
from .geometry import Box, Cell, uniform_partition
from .simulate import FiniteCMCSpec
from .trajectory import Trajectory


# ---------------------------------------------------------------------------
# occupation measures


class GridOccupation:
    """Exact occupation over a uniform (state, control) cell grid.

    Positions are uniform inside cells, so the mass of any rectangle is
    the overlap-weighted sum of cell masses.
    """

    def __init__(self, masses: np.ndarray, flavor: str = "nu"):
        self.masses = np.asarray(masses, dtype=float)
        self.flavor = flavor

    @classmethod
    def running(cls, spec: FiniteCMCSpec, n: int) -> "GridOccupation":
        return cls(spec.pair_marginals(n).mean(axis=0), flavor="nu_n")

    @classmethod
    def limit(cls, spec: FiniteCMCSpec) -> "GridOccupation":
        # extras may carry the stationary law of the *recorded* pairs;
        # analysis-only pair laws under other conventions do not qualify
        if "stationary_pair_mass" in spec.extras:
            return cls(spec.extras["stationary_pair_mass"], flavor="nu")
        q = spec.pair_operator()
        pi = stationary_distribution(q)
        s, c = spec.n_state_cells, spec.n_control_cells
        return cls(pi.reshape(s, c), flavor="nu")

    def mass_in_foot_box(self, box: Box) -> float:
        s, c = self.masses.shape
        total = 0.0
        for i in range(s):
            for j in range(c):
                cell_box = Box((i / s, j / c), ((i + 1) / s, (j + 1) / c))
                overlap = _box_overlap_fraction(box, cell_box)
                if overlap:
                    total += self.masses[i, j] * overlap
        return total

    def foot_density(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Occupation density at scalar (state, control) points."""
        s, c = self.masses.shape
        ix = np.clip((np.asarray(x) * s).astype(int), 0, s - 1)
        ia = np.clip((np.asarray(a) * c).astype(int), 0, c - 1)
        return self.masses[ix, ia] * s * c


def _box_overlap_fraction(box: Box, cell_box: Box) -> float:
    """Fraction of cell_box covered by box."""
    frac = 1.0
    for l1, h1, l2, h2 in zip(box.lo, box.hi, cell_box.lo, cell_box.hi):
        inter = min(h1, h2) - max(l1, l2)
        if inter <= 0:
            return 0.0
        frac *= inter / (h2 - l2)
    return frac


class LebesgueOccupation:
    """Uniform occupation on the (state, control) square."""

    flavor = "nu"

    def mass_in_foot_box(self, box: Box) -> float:
        return box.volume()

    def foot_density(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        return np.ones(np.broadcast(np.asarray(x), np.asarray(a)).shape)


class SampleOccupation:
    """Sample-average surrogate from replicated trajectories."""

    flavor = "nu_n"

    def __init__(self, trajectories: list[Trajectory]):
        self.points = np.vstack([t.pair_matrix() for t in trajectories])

    def mass_in_foot_box(self, box: Box) -> float:
        inside = np.ones(len(self.points), dtype=bool)
        for axis, (lo, hi) in enumerate(zip(box.lo, box.hi)):
            col = self.points[:, axis]
            inside &= (col >= lo) & ((col < hi) | ((hi == 1.0) & (col == 1.0)))
        return float(inside.mean())


def stationary_distribution(q: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Stationary row vector of a stochastic matrix, by power iteration."""
    pi = np.full(len(q), 1.0 / len(q))
    for _ in range(100_000):
        nxt = pi @ q
        if np.abs(nxt - pi).max() < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise DiagnosticsError("stationary distribution did not converge")


# ---------------------------------------------------------------------------
# return times and the recurrence inequality


def pair_visits(traj: Trajectory, box: Box) -> np.ndarray:
    """Boolean visit sequence of the (state, control) box."""
    points = traj.pair_matrix()
    inside = np.ones(len(points), dtype=bool)
    for axis, (lo, hi) in enumerate(zip(box.lo, box.hi)):
        col = points[:, axis]
        inside &= (col >= lo) & ((col < hi) | ((hi == 1.0) & (col == 1.0)))
    return inside


def return_times(visits: np.ndarray) -> dict:
    """Gap statistics of a boolean visit sequence over times 1..n.

    Returns realized inter-visit gaps plus the censored pieces before
    the first and after the last visit, and the pigeonhole-safe bound
    ``t_hat`` with the property  visits/n >= 1/t_hat - 1/n.
    """
    visits = np.asarray(visits, dtype=bool)
    n = len(visits)
    times = np.flatnonzero(visits) + 1  # 1-based visit times
    if len(times) == 0:
        raise SetNeverVisitedError("the set is never visited")
    gaps = np.diff(times)
    first = int(times[0])
    tail = n - int(times[-1])
    t_hat = max([first, tail + 1, *gaps.tolist()])
    return {
        "count": len(times),
        "gaps": gaps,
        "first_arrival": first,
        "censored_tail": tail,
        "t_hat": float(t_hat),
        "frequency": len(times) / n,
    }


def empirical_T(records: list[dict]) -> float:
    """Worst pigeonhole return bound across replicated visit records."""
    if not records:
        raise DiagnosticsError("no return-time records")
    return max(r["t_hat"] for r in records)


def kac_check(nu_n: float, t_value: float, n: int) -> dict:
    """The recurrence inequality  nu_n(S) >= 1/T(S) - 1/n."""
    rhs = (0.0 if math.isinf(t_value) else 1.0 / t_value) - 1.0 / n
    return {"lhs": nu_n, "rhs": rhs, "ok": nu_n >= rhs, "margin": nu_n - rhs}


def expected_hit_times(q: np.ndarray, hit_probs: np.ndarray) -> np.ndarray:
    """Exact expected first-hit times of a thinned set, per current cell.

    ``q`` is the pair-cell operator and ``hit_probs[j]`` the chance that
    a visit to cell ``j`` lands in the target set (in-cell uniform
    positions).  Solves  v = 1 + q @ ((1 - h) * v).  Cells that can dodge
    forever with positive probability get infinite entries, detected
    structurally: they reach a closed hit-free region of the support
    graph.
    """
    k = len(q)
    h = np.asarray(hit_probs, dtype=float)
    m = q * (1.0 - h)[None, :]
    adj = m > 0
    # closed hit-free regions: no q-support leaves them, not even into
    # sure-hit cells (whose survival-weighted edges vanish from adj)
    qadj = q > 0
    trap = h == 0
    while True:
        keep = trap & ~(qadj & ~trap[None, :]).any(axis=1)
        if (keep == trap).all():
            break
        trap = keep
    # a cell dodges forever iff a survivable path reaches such a region
    dodging = trap.copy()
    while True:
        grown = dodging | (adj & dodging[None, :]).any(axis=1)
        if (grown == dodging).all():
            break
        dodging = grown
    v = np.full(k, math.inf)
    finite = ~dodging
    if finite.any():
        count = int(finite.sum())
        sub = m[np.ix_(finite, finite)]
        v[finite] = np.linalg.solve(np.eye(count) - sub, np.ones(count))
    return v


def worst_expected_return(spec: FiniteCMCSpec, box: Box) -> float:
    """T(S) for a time-homogeneous finite chain: the worst conditioning
    cell's expected first-hit time of the box (an upper bound when some
    cells are never actually occupied, which only slackens the
    recurrence inequality)."""
    s, c = spec.n_state_cells, spec.n_control_cells
    hit = np.empty(s * c)
    for i in range(s):
        for j in range(c):
            cell_box = Box((i / s, j / c), ((i + 1) / s, (j + 1) / c))
            hit[i * c + j] = _box_overlap_fraction(box, cell_box)
    v = expected_hit_times(spec.pair_operator(), hit)
    return float(v.max())


def independent_schedule_return(
    hit_probs: np.ndarray, tail_prob: float
) -> float:
    """T(S) when pair visits are independent with a time-varying hit
    probability that becomes constant after the schedule runs out."""
    if tail_prob <= 0:
        return math.inf
    u = 1.0 / tail_prob
    worst = u
    for h in hit_probs[::-1]:
        u = 1.0 + (1.0 - h) * u
        worst = max(worst, u)
    return worst


def minorized_return_bounds(hit_rate: float) -> dict:
    """Two candidate bounds on the mean return time from a hit rate.

    When every step lands in the set with probability at least ``p``,
    summing the geometric tail P(return > q) <= (1 - p)^q gives the
    bound 1/p (``safe``).  A tighter closed form, p/(1-p) + 1 = 1/(1-p),
    is sometimes quoted for the same quantity but undercuts the
    geometric-tail sum for every p in (0, 1); it is returned as
    ``optimistic`` with ``suspect=True`` so callers can surface the
    discrepancy instead of silently adopting the smaller value.  Checks
    in this package always use ``safe``.
    """
    if not 0.0 < hit_rate < 1.0:
        raise DiagnosticsError("hit rate must lie strictly between 0 and 1")
    safe = 1.0 / hit_rate
    optimistic = 1.0 / (1.0 - hit_rate)
    return {
        "hit_rate": hit_rate,
        "safe": safe,
        "optimistic": optimistic,
        "suspect": optimistic < safe,
    }


# ---------------------------------------------------------------------------
# mixing


def weak_mixing_products(spec: FiniteCMCSpec, max_gap: int = 6) -> list[dict]:
    """Contraction coefficients of pair-operator powers against the
    geometric envelope  (1 - vol * kappa) ** (gap - 1).

    Only defined for chains whose controls make the pair process Markov.
    """
    if spec.control_rule.kind not in {"markov", "iid"}:
        raise MarkovControlsRequiredError(
            "weak-mixing products need Markov (or i.i.d.) controls"
        )
    kappa = spec.extras.get("kappa")
    vol = spec.extras.get("support_volume", 1.0)
    if kappa is None:
        raise MissingFieldError("spec extras lack the minorization level 'kappa'")
    q = spec.pair_operator()
    power = q.copy()
    rows = []
    for gap in range(1, max_gap + 1):
        theta = _dobrushin(power)  # contraction of the (j - i)-step operator
        bound = (1.0 - vol * kappa) ** (gap - 1)
        rows.append({"gap": gap, "theta": theta, "bound": bound, "ok": theta <= bound + 1e-12})
        power = power @ q
    return rows


def _dobrushin(p: np.ndarray) -> float:
    worst = 0.0
    for i in range(len(p)):
        diff = np.abs(p[i] - p[i + 1 :]).sum(axis=1)
        if len(diff):
            worst = max(worst, 0.5 * float(diff.max()))
    return worst


def mixing_constants(kappa: float, support_volume: float = 1.0) -> dict:
    """Geometric-decay constants implied by a one-step minorization."""
    rate = support_volume * kappa
    if not 0 < rate <= 1:
        raise DiagnosticsError(f"minorization mass {rate} outside (0, 1]")
    return {
        "c_delta": 1.0 / rate,
        "c_p": -math.log(1.0 - rate) if rate < 1 else math.inf,
    }


# ---------------------------------------------------------------------------
# pairwise visit intensity


def rho_star(spec: FiniteCMCSpec, box: Box, horizon: int = 64) -> float:
    """sup over times of max(single-visit mass, sqrt of joint-visit mass).

    Stationary start; the joint term scans gaps up to ``horizon`` (it
    converges geometrically to the squared single-visit mass).
    """
    s, c = spec.n_state_cells, spec.n_control_cells
    hit = np.empty(s * c)
    for i in range(s):
        for j in range(c):
            cell_box = Box((i / s, j / c), ((i + 1) / s, (j + 1) / c))
            hit[i * c + j] = _box_overlap_fraction(box, cell_box)
    q = spec.pair_operator()
    if "stationary_pair_mass" in spec.extras:
        pi = np.asarray(spec.extras["stationary_pair_mass"]).reshape(-1)
    else:
        pi = stationary_distribution(q)
    single = float(pi @ hit)
    best = single
    forward = hit.copy()
    for _ in range(horizon):
        forward = q @ forward  # forward[j] = P(hit after gap | now at j)
        joint = float((pi * hit) @ forward)
        best = max(best, math.sqrt(max(joint, 0.0)))
    return best


# ---------------------------------------------------------------------------
# remainder terms and sample-size predicates


def remainder_term(flavor: str, **inputs) -> float:
    """Exponential remainder of the deterministic-loss guarantees.

    Flavors: ``general`` (per-set visit data plus an occupation drift),
    ``markov`` (uniform cell-mass floor), and ``return-time`` (worst-case
    expected recurrence of the selected set).
    """
    def need(*names):
        missing = [k for k in names if k not in inputs]
        if missing:
            raise MissingFieldError(
                f"remainder flavor {flavor!r} is missing {missing}"
            )

    need("n", "depth", "d1", "d2")
    n = inputs["n"]
    cells = 2.0 ** (inputs["depth"] * (inputs["d1"] + inputs["d2"]))
    logn2 = math.log(n) ** 2

    if flavor == "general":
        need("c_p", "c_delta", "sets", "r_n")
        c_p, c_delta, r_n = inputs["c_p"], inputs["c_delta"], inputs["r_n"]
        worst = 0.0
        for entry in inputs["sets"]:
            nu, rho = entry["nu"], entry["rho_star"]
            num = c_p * n * nu**2 - 2.0 * n * c_p * r_n
            den = 4.0 * c_delta * rho + 4.0 / n + 2.0 * nu * logn2 + 2.0 * r_n * logn2
            worst = max(worst, math.exp(-num / den))
        return cells * worst + r_n

    if flavor == "markov":
        need("c_p", "c_delta", "k0")
        c_p, c_delta, k0 = inputs["c_p"], inputs["c_delta"], inputs["k0"]
        return cells * math.exp(
            -c_p * k0 * n / (c_delta * cells * 8.0 * logn2)
        )

    if flavor == "return-time":
        need("c_p", "c_delta", "t_star", "rho_star")
        c_p, c_delta = inputs["c_p"], inputs["c_delta"]
        t, rho = inputs["t_star"], inputs["rho_star"]
        num = c_p * n / (4.0 * t**2)
        den = 4.0 * c_delta * rho + (4.0 + logn2) / (2.0 * t)
        return cells * math.exp(-num / den)

    raise DiagnosticsError(f"unknown remainder flavor {flavor!r}")


def select_worst_set(sets: list[dict], n: int, c_p: float, c_delta: float) -> int:
    """Index of the set dominating the occupation-based remainder: the
    one whose visit statistics give the weakest concentration exponent."""
    logn2 = math.log(n) ** 2
    best_idx, best_val = 0, -math.inf
    for idx, entry in enumerate(sets):
        nu, rho = entry["nu"], entry["rho_star"]
        num = c_p * n * nu**2
        den = 4.0 * c_delta * rho + 4.0 / n + 2.0 * nu * logn2
        val = math.exp(-num / den)
        if val > best_val:
            best_idx, best_val = idx, val
    return best_idx


def select_return_set(sets: list[dict], n: int, c_p: float, c_delta: float) -> int:
    """Index of the set dominating the return-time remainder: the one
    maximizing the exponential factor built from T(S) and rho_star(S)."""
    logn2 = math.log(n) ** 2
    best_idx, best_val = 0, -math.inf
    for idx, entry in enumerate(sets):
        t, rho = entry["t"], entry["rho_star"]
        if math.isinf(t):
            return idx  # infinite return time dominates everything
        num = c_p * n / (4.0 * t**2)
        den = 4.0 * c_delta * rho + 4.0 / n + logn2 / (2.0 * t)
        val = math.exp(-num / den)
        if val > best_val:
            best_idx, best_val = idx, val
    return best_idx


def occupation_measures(spec: FiniteCMCSpec, n: int) -> dict:
    """Limit and running occupations of a finite chain, with their
    total-variation gap (exact: both are piecewise uniform on cells)."""
    nu = GridOccupation.limit(spec)
    nu_n = GridOccupation.running(spec, n)
    r_n = 0.5 * float(np.abs(nu.masses - nu_n.masses).sum())
    return {"nu": nu, "nu_n": nu_n, "r_n": r_n}


def sample_size_predicates(
    n: int,
    t_star: float,
    rho_star_value: float,
    c_p: float = 1.0,
    c_delta: float = 1.0,
    constant: float = 1.0,
    t_tilde: float | None = None,
) -> dict:
    """The two sample-complexity predicates of the minimax dichotomy.

    ``easy`` guarantees a vanishing remainder (at most 4/n); ``hard``
    puts the problem below the information threshold (risk above 1/2).
    They can never both hold once  constant * (log n)^3 * log(t_tilde)
    exceeds 1.
    """
    if t_tilde is None:
        t_tilde = t_star
    complexity = t_star**2 * (c_delta * rho_star_value + 1.0 / t_star) / c_p
    easy = n / math.log(n) ** 3 >= constant * complexity * math.log(t_tilde)
    hard = n <= complexity
    return {
        "easy": easy,
        "hard": hard,
        "complexity": complexity,
        "easy_risk_bound": 4.0 / n if easy else None,
        "hard_risk_bound": 0.5 if hard else None,
    }


# ---------------------------------------------------------------------------
# occupation scans and the non-convergence detector


def occupation_scan(series, k_range) -> dict:
    """Occupation values along the doubling subsequences n = 2**k and
    n = 3 * 2**(k-1), split by the parity of k.

    ``series(n)`` returns the occupation at horizon n.  Within each of
    the four (subsequence, parity) classes the values converge; the
    detector reports the four limit estimates and whether the two
    subsequences share any limit point.
    """
    classes: dict[tuple[str, int], list[float]] = {}
    for k in k_range:
        classes.setdefault(("pow2", k % 2), []).append(float(series(2**k)))
        classes.setdefault(("3pow2", k % 2), []).append(float(series(3 * 2 ** (k - 1))))
    limits = {}
    converged = True
    for key, vals in classes.items():
        limits[key] = vals[-1]
        if len(vals) >= 2 and abs(vals[-1] - vals[-2]) > 0.02:
            converged = False
    a_limits = [v for (name, _), v in limits.items() if name == "pow2"]
    b_limits = [v for (name, _), v in limits.items() if name == "3pow2"]
    separation = min(abs(a - b) for a in a_limits for b in b_limits)
    return {
        "limits": limits,
        "converged_within_classes": converged,
        "separation": separation,
        "distinct": converged and separation > 0.02,
    }


# ---------------------------------------------------------------------------
# dyadic sets over the pair square


def dyadic_foot_boxes(max_depth: int, d1: int = 1, d2: int = 1) -> list[tuple[Cell, Box]]:
    """All dyadic cells of the (state, control) square up to a depth."""
    axes = d1 + d2
    out = []
    for depth in range(max_depth + 1):
        for cell in uniform_partition(depth, axes):
            out.append((cell, cell.box(axes)))
    return out


# ---------------------------------------------------------------------------
# covering the perturbation block


def unvisited_block_probability(
    spec: FiniteCMCSpec, n: int, replications: int, seed: int = 0
) -> dict:
    """Chance that some (first-block state, control) cell goes unvisited
    in n steps, with its standard error.

    The perturbation bits live on those cells, so an unvisited cell is
    unidentifiable no matter the estimator.
    """
    first = spec.extras.get("first_block")
    if first is None:
        raise DiagnosticsError("spec has no designated first block")
    c = spec.n_control_cells
    rng = np.random.default_rng(seed)
    states, controls = spec.simulate_cells(n, rng, reps=replications)
    states, controls = states[:, :n], controls[:, :n]  # exactly n pairs
    misses = 0
    target = first * c
    for r in range(replications):
        mask = states[r] < first
        seen = np.unique(states[r][mask] * c + controls[r][mask])
        misses += len(seen) < target
    prob = misses / replications
    se = math.sqrt(max(prob * (1 - prob), 1e-12) / replications)
    return {"probability": prob, "se": se, "replications": replications}
