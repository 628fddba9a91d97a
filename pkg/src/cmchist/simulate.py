"""Simulators for the benchmark chain families.

Finite-state families share one chassis: state and control cells are
uniform grids on the unit interval, a transition tensor holds the
piecewise-constant conditional densities, and a control rule maps
(time, state cell) to a distribution over control cells.  Values are
drawn uniformly inside their cells, so the continuous kernel really is
the given piecewise-constant density.

On top of the chassis: a fully connected family with two-sided density
bounds, a deterministically controlled chain whose occupation measures
oscillate instead of converging, an Assouad-type family with a known
stationary law, a chain started out of equilibrium whose occupation
measure is an explicit startup mixture, a control process with a
minorized but non-mixing conditional law, and a smooth sinusoidal kernel
for convergence-rate studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ChainSpecError
from .trajectory import Trajectory


# ---------------------------------------------------------------------------
# control rules


class IIDControls:
    """Controls drawn from one fixed distribution, independent of state."""

    kind = "iid"

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)
        _check_distribution(self.probs, "control distribution")

    def probabilities(self, i: int, state_cell: int) -> np.ndarray:
        return self.probs


class MarkovControls:
    """Controls drawn from a state-dependent table, time-homogeneous."""

    kind = "markov"

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ChainSpecError(
                f"control table must be 2-d (state cell -> control law), "
                f"got shape {self.table.shape}"
            )
        for row in self.table:
            _check_distribution(row, "control table row")

    def probabilities(self, i: int, state_cell: int) -> np.ndarray:
        return self.table[state_cell]


class TimeVaryingControls:
    """Controls from a time-dependent, state-independent schedule."""

    kind = "time_varying"

    def __init__(self, schedule):
        if not callable(schedule):
            raise ChainSpecError(
                "schedule must be a callable mapping the step index to a "
                "probability vector"
            )
        self.schedule = schedule

    def probabilities(self, i: int, state_cell: int) -> np.ndarray:
        return np.asarray(self.schedule(i), dtype=float)


def _check_distribution(probs, label):
    if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
        raise ChainSpecError(f"{label} is not a probability vector: {probs}")


# ---------------------------------------------------------------------------
# finite-state chassis


@dataclass
class FiniteCMCSpec:
    """A controlled chain on uniform grids of the unit square."""

    density: np.ndarray  # (S, C, S): conditional next-state densities
    control_rule: object
    initial: np.ndarray  # (S,) distribution of the first state cell
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.density = np.asarray(self.density, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        if self.density.ndim != 3 or self.density.shape[0] != self.density.shape[2]:
            raise ChainSpecError(
                f"density tensor must be (S, C, S), got {self.density.shape}"
            )
        if (self.density < 0).any():
            raise ChainSpecError("negative transition density")
        s = self.n_state_cells
        masses = self.density.sum(axis=2) / s
        if not np.allclose(masses, 1.0, atol=1e-9):
            raise ChainSpecError("conditional densities do not integrate to 1")
        _check_distribution(self.initial, "initial distribution")
        rule = self.control_rule
        if getattr(rule, "kind", None) == "markov":
            want = (s, self.n_control_cells)
            if rule.table.shape != want:
                raise ChainSpecError(
                    f"control table shape {rule.table.shape} does not match "
                    f"the (state, control) grid {want}"
                )

    @property
    def n_state_cells(self) -> int:
        return self.density.shape[0]

    @property
    def n_control_cells(self) -> int:
        return self.density.shape[1]

    def transition_probs(self, state_cell: int, control_cell: int) -> np.ndarray:
        return self.density[state_cell, control_cell] / self.n_state_cells

    def density_function(self):
        """The kernel as a vectorized callable on unit-cube coordinates."""
        s, c = self.n_state_cells, self.n_control_cells

        def kernel(x, a, y):
            xi = np.minimum((np.asarray(x)[..., 0] * s).astype(int), s - 1)
            ai = np.minimum((np.asarray(a)[..., 0] * c).astype(int), c - 1)
            yi = np.minimum((np.asarray(y)[..., 0] * s).astype(int), s - 1)
            return self.density[xi, ai, yi]

        return kernel

    # -- sampling ---------------------------------------------------------

    def simulate_cells(self, n: int, rng, reps: int = 1):
        """Cell-index paths: states (reps, n+1) and controls (reps, n+1)."""
        s, c = self.n_state_cells, self.n_control_cells
        states = np.empty((reps, n + 1), dtype=np.int64)
        controls = np.empty((reps, n + 1), dtype=np.int64)
        states[:, 0] = rng.choice(s, size=reps, p=self.initial)
        rule = self.control_rule
        for i in range(n + 1):
            if rule.kind == "markov":
                probs = rule.table[states[:, i]]  # (reps, C)
                controls[:, i] = _sample_rows(probs, rng)
            else:
                p = rule.probabilities(i, 0)
                controls[:, i] = rng.choice(c, size=reps, p=p)
            if i < n:
                rows = self.density[states[:, i], controls[:, i]] / s
                states[:, i + 1] = _sample_rows(rows, rng)
        return states, controls

    def simulate(self, n: int, seed=None, midpoints: bool = False) -> Trajectory:
        """One trajectory of n transitions, positions uniform in-cell."""
        rng = np.random.default_rng(seed)
        cells_x, cells_a = self.simulate_cells(n, rng)
        x = _embed_cells(cells_x[0], self.n_state_cells, rng, midpoints)
        a = _embed_cells(cells_a[0], self.n_control_cells, rng, midpoints)
        return Trajectory(x[:, None], a[:, None], meta=dict(self.extras.get("meta", {})))

    def simulate_batch(self, n: int, reps: int, seed=None) -> list[Trajectory]:
        rng = np.random.default_rng(seed)
        cells_x, cells_a = self.simulate_cells(n, rng, reps)
        out = []
        for r in range(reps):
            x = _embed_cells(cells_x[r], self.n_state_cells, rng, False)
            a = _embed_cells(cells_a[r], self.n_control_cells, rng, False)
            out.append(Trajectory(x[:, None], a[:, None]))
        return out

    # -- exact occupation -------------------------------------------------

    def pair_marginals(self, n: int) -> np.ndarray:
        """Exact laws of (X_i, a_i) on the cell grid, i = 0..n-1: (n, S, C)."""
        s = self.n_state_cells
        rule = self.control_rule
        state = self.initial.copy()
        out = np.empty((n, s, self.n_control_cells))
        for i in range(n):
            if rule.kind == "markov":
                pair = state[:, None] * rule.table
            else:
                pair = state[:, None] * rule.probabilities(i, 0)[None, :]
            out[i] = pair
            state = np.einsum("xc,xcy->y", pair, self.density) / s
        return out

    def dyadic_kernel(self):
        """The density as a piecewise-constant kernel on a uniform dyadic
        partition.  Needs power-of-two cell counts on both axes."""
        from .geometry import SpaceShape, uniform_partition
        from .histogram import PiecewiseKernel

        s, c = self.n_state_cells, self.n_control_cells
        ls, lc = s.bit_length() - 1, c.bit_length() - 1
        if 2**ls != s or 2**lc != c:
            raise ChainSpecError(
                f"cell counts ({s}, {c}) are not powers of two"
            )
        if ls != lc:
            raise ChainSpecError(
                f"state and control grids have unequal depths ({ls}, {lc})"
            )
        shape = SpaceShape(1, 1)
        partition = uniform_partition(ls, shape.full_axes)
        values = {}
        for cell in partition.leaves:
            box = cell.box(shape.full_axes)
            xi = min(int(box.lo[0] * s), s - 1)
            ai = min(int(box.lo[1] * c), c - 1)
            yi = min(int(box.lo[2] * s), s - 1)
            values[cell] = float(self.density[xi, ai, yi])
        return PiecewiseKernel(partition, values, shape)

    def pair_operator(self, at_time: int = 0) -> np.ndarray:
        """One-step operator on (state, control) cells, row-stochastic
        (S*C, S*C).  Time-varying rules are frozen at ``at_time + 1``."""
        s, c = self.n_state_cells, self.n_control_cells
        rule = self.control_rule
        q = np.empty((s * c, s * c))
        for x in range(s):
            for u in range(c):
                trans = self.density[x, u] / s  # (S,)
                if rule.kind == "markov":
                    block = trans[:, None] * rule.table
                else:
                    block = trans[:, None] * rule.probabilities(at_time + 1, 0)[None, :]
                q[x * c + u] = block.reshape(-1)
        return q


def _sample_rows(probs: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of a (k, m) probability array."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None] * cum[:, -1:]
    return (u >= cum).sum(axis=1)


def _embed_cells(cells: np.ndarray, n_cells: int, rng, midpoints: bool) -> np.ndarray:
    if midpoints:
        offset = 0.5
    else:
        offset = rng.random(len(cells))
    return (cells + offset) / n_cells


# ---------------------------------------------------------------------------
# fully connected family


def make_fully_connected(
    eps0: float = 0.5,
    n_state_cells: int = 4,
    n_control_cells: int = 4,
    seed=None,
) -> FiniteCMCSpec:
    """Random kernel with two-sided density bounds eps0 <= s <= 1/eps0.

    Every conditional row keeps mass at least ``eps0/S`` in every state
    cell, so the chain forgets its past geometrically; the tags carry the
    implied contraction constants.
    """
    if not 0 < eps0 <= 1:
        raise ChainSpecError(f"eps0 must be in (0, 1], got {eps0}")
    rng = np.random.default_rng(seed)
    s, c = n_state_cells, n_control_cells
    hi = 1.0 / (s * eps0)
    density = np.empty((s, c, s))
    for x in range(s):
        for u in range(c):
            while True:
                masses = eps0 / s + rng.dirichlet(np.ones(s)) * (1.0 - eps0)
                if (masses <= hi).all():
                    break
            density[x, u] = masses * s
    table = 0.1 / c + 0.9 * rng.dirichlet(np.ones(c), size=s)
    extras = {
        "eps0": eps0,
        "kappa": eps0,
        "support_volume": 1.0,
        "c_delta": 1.0 / eps0,
        "c_p": -math.log(1.0 - eps0) if eps0 < 1 else math.inf,
        "meta": {"family": "fully-connected"},
    }
    return FiniteCMCSpec(
        density=density,
        control_rule=MarkovControls(table),
        initial=np.full(s, 1.0 / s),
        extras=extras,
    )


# ---------------------------------------------------------------------------
# deterministically controlled chain without occupation limits


class InidChain:
    """Deterministic controls whose sign dwells on doubling blocks.

    The control at time ``i >= 1`` is the sign ``(-1)**floor(log2 i)``
    and the state simply echoes the previous control; the sign at time 0
    is +1 and serves only as the seed for the first state.  Signs embed
    into the unit interval as cell midpoints (0.25 for -1, 0.75 for +1),
    so trajectories are deterministic.  A simulated run is recorded from
    time 1 onward: record ``j`` holds the pair ``(X_{j+1}, a_{j+1})``
    with ``X_{j+1} = a_j``, so pair frequencies over the first ``n``
    records coincide exactly with :meth:`realized_occupation`.
    Occupation frequencies of the (+, +) cell oscillate forever between
    distinct limits along doubling subsequences.
    """

    d1 = 1
    d2 = 1

    @staticmethod
    def control_sign(i: int) -> int:
        if i == 0:
            return 1
        return -1 if (i.bit_length() - 1) % 2 else 1

    def signs(self, n: int) -> np.ndarray:
        return np.array([self.control_sign(i) for i in range(n + 1)])

    def simulate(self, n: int, seed=None) -> Trajectory:
        a = self.signs(n + 1)
        embed = lambda v: np.where(v > 0, 0.75, 0.25)
        # states echo the previous sign; controls are the current sign
        return Trajectory(
            embed(a[:-1])[:, None], embed(a[1:])[:, None], meta={"family": "inid"}
        )

    def closed_form_occupation(self, n: int) -> Fraction:
        """Stated occupation of the (+, +) pair cell after n steps."""
        k = n.bit_length() - 1
        r = n - (1 << k)
        total = Fraction(4 ** ((k + 1) // 2) - 1, 6)
        if k % 2 == 0:
            total += Fraction(r + 1, 2)
        return total / n

    def realized_occupation(self, n: int) -> Fraction:
        """Empirical frequency of the (+, +) pair cell over i = 1..n."""
        a = self.signs(n)
        hits = int(((a[:-1] > 0) & (a[1:] > 0)).sum())
        return Fraction(hits, n)


def make_inid_chain() -> InidChain:
    return InidChain()


# ---------------------------------------------------------------------------
# Assouad-type family


def make_assouad_chain(
    iota: float,
    eps: float,
    xi: np.ndarray | None = None,
    n_state_cells: int = 12,
    n_control_cells: int = 3,
) -> FiniteCMCSpec:
    """Two-block family with explicit stationary law.

    State cells split into a first block of ``S/3`` cells and a second
    block of ``2S/3`` cells.  Every row sends mass ``iota`` back to the
    first block (uniformly); first-block row ``i`` concentrates mass
    ``1 - 2*iota`` on its own pair of second-block cells, tilted by
    ``eps`` in the direction of the sign bit ``xi[control, i]``; second
    block rows spread ``1 - iota`` uniformly over the second block.

    Because every column of the first block receives the same mass from
    every row and controls are uniform i.i.d., visits to any first-block
    pair cell form an i.i.d. Bernoulli sequence -- which makes return
    times, covering times and the dependence coefficient of such cells
    exactly computable.
    """
    if not (1.0 / 32.0 < iota < 31.0 / 64.0):
        raise ChainSpecError(f"iota must lie in (1/32, 31/64), got {iota}")
    if not (0.0 < eps < 1.0 / 32.0):
        raise ChainSpecError(f"eps must lie in (0, 1/32), got {eps}")
    s, c = n_state_cells, n_control_cells
    if s % 3:
        raise ChainSpecError("state cell count must be divisible by 3")
    first = s // 3
    second = s - first
    if xi is None:
        xi = np.indices((c, first)).sum(axis=0) % 2  # alternating bits
    xi = np.asarray(xi, dtype=int)
    if xi.shape != (c, first) or not np.isin(xi, (0, 1)).all():
        raise ChainSpecError(f"xi must be a ({c}, {first}) 0/1 array")

    density = np.zeros((s, c, s))
    spread = 3.0 * iota / (2.0 * (s - 3))  # off-pair mass in the second block
    for u in range(c):
        for i in range(first):
            row = np.empty(s)
            row[:first] = 3.0 * iota / s
            row[first:] = spread
            tilt = xi[u, i] * eps
            row[first + 2 * i] = (1.0 + tilt - 2.0 * iota) / 2.0
            row[first + 2 * i + 1] = (1.0 - tilt - 2.0 * iota) / 2.0
            density[i, u] = row * s
        for j in range(first, s):
            row = np.empty(s)
            row[:first] = 3.0 * iota / s
            row[first:] = 3.0 * (1.0 - iota) / (2.0 * s)
            density[j, u] = row * s

    # stationary state masses: first block uniform; a second-block cell
    # tilts with the control-averaged sign bit of the row feeding it
    q = xi.mean(axis=0)  # (first,)
    pi = np.empty(s)
    pi[:first] = iota / first
    for i in range(first):
        for sign, col in ((+1.0, first + 2 * i), (-1.0, first + 2 * i + 1)):
            pi[col] = (
                iota * (1.0 + sign * eps * q[i] - iota) + (1.0 - iota) ** 2
            ) / (2.0 * first)
    extras = {
        "iota": iota,
        "eps": eps,
        "xi": xi,
        "first_block": first,
        "stationary_state_mass": pi,
        "stationary_pair_mass": pi[:, None] / c * np.ones(c),
        "rho_star_first_block": 3.0 * iota / (s * c),
        "rho_star_reference_bound": 9.0 * (1.0 - iota) / (2.0 * s * c),
        "covering_threshold": s * c / (6.0 * iota) * math.log(s * c / 3.0),
        "meta": {"family": "assouad"},
    }
    return FiniteCMCSpec(
        density=density,
        control_rule=IIDControls(np.full(c, 1.0 / c)),
        initial=pi,
        extras=extras,
    )


# ---------------------------------------------------------------------------
# startup-mixture chain


def make_comparison_chain(i0: int) -> FiniteCMCSpec:
    """Chain whose next state copies the control's half of the interval.

    Controls pick the lower half with probability ``1/i0`` on the first
    ``i0 - 1`` steps and ``1/2`` from step ``i0`` onwards, so ``i0 = 1``
    is the homogeneous chain.  Pairing each state with the control that
    generated it, the pair laws are independent across time and, for
    ``n >= i0``, the running occupation measure is exactly the startup
    mixture ``(i0/n) * nu0 + (1 - i0/n) * nu`` where ``nu0`` averages
    the first ``i0`` pair laws; both components sit on the diagonal
    quadrants.
    """
    if i0 < 1:
        raise ChainSpecError(f"i0 must be a positive integer, got {i0}")
    density = np.zeros((2, 2, 2))
    density[:, 0, 0] = 2.0
    density[:, 1, 1] = 2.0

    def schedule(i: int) -> np.ndarray:
        if i < i0 - 1:
            return np.array([1.0 / i0, 1.0 - 1.0 / i0])
        return np.array([0.5, 0.5])

    nu_head = np.zeros((2, 2))
    nu_head[0, 0] = 1.0 / i0
    nu_head[1, 1] = 1.0 - 1.0 / i0
    nu = np.zeros((2, 2))
    nu[0, 0] = nu[1, 1] = 0.5
    nu0 = ((i0 - 1) * nu_head + nu) / i0

    def nu_n_masses(n: int) -> np.ndarray:
        if n < i0:
            raise ChainSpecError(f"need n >= i0 = {i0} for the startup mixture")
        return (i0 / n) * nu0 + ((n - i0) / n) * nu

    def r_n(n: int) -> float:
        """Total-variation distance between the running and limit laws."""
        return (i0 / n) * 0.5 * np.abs(nu0 - nu).sum()

    extras = {
        "i0": i0,
        "nu0_pair_mass": nu0,
        "nu_pair_mass": nu,
        "nu_n_pair_mass": nu_n_masses,
        "r_n": r_n,
        "pairing": "state with generating control (X_j, a_{j-1})",
        # recorded pairs (X_i, a_i) have independent uniform components
        # in the tail, so their stationary law is flat on the quadrants
        "stationary_pair_mass": np.full((2, 2), 0.25),
        "meta": {"family": "comparison", "i0": i0},
    }
    return FiniteCMCSpec(
        density=density,
        control_rule=TimeVaryingControls(schedule),
        initial=np.array([0.5, 0.5]),
        extras=extras,
    )


def generating_pair_points(traj: Trajectory) -> np.ndarray:
    """(n, d1+d2) array of (X_j, a_{j-1}) pairs, j = 1..n."""
    return np.hstack([traj.states[1:], traj.controls[:-1]])


# ---------------------------------------------------------------------------
# minorized but non-mixing control process


class MinorizedProcess:
    """States i.i.d. uniform; controls conditionally i.i.d. given the first.

    When the first control lands in the lower half, later controls are
    uniform; otherwise they favor the upper half with density 7/4 (and
    1/4 below).  Every conditional density is at least 1/4, yet the
    process never mixes: the first control stays visible in all later
    frequencies.
    """

    d1 = 1
    d2 = 1
    retention = 0.25  # uniform lower bound on conditional densities

    #: P(a_i in upper, a_0 in upper), i >= 1
    joint_upper = Fraction(7, 16)
    #: P(a_i in upper), i >= 1
    marginal_upper = Fraction(11, 16)

    def control_density(self, value: float, first_in_upper: bool) -> float:
        if not first_in_upper:
            return 1.0
        return 1.75 if value >= 0.5 else 0.25

    def sample_controls(self, n: int, rng, reps: int = 1) -> np.ndarray:
        """(reps, n+1) control values a_0..a_n."""
        a = np.empty((reps, n + 1))
        a[:, 0] = rng.random(reps)
        upper = a[:, 0] >= 0.5
        u = rng.random((reps, n))
        lower_draw = rng.random((reps, n)) * 0.5
        upper_draw = 0.5 + rng.random((reps, n)) * 0.5
        biased = np.where(u < 0.125, lower_draw, upper_draw)
        uniform = rng.random((reps, n))
        a[:, 1:] = np.where(upper[:, None], biased, uniform)
        return a

    def simulate(self, n: int, seed=None) -> Trajectory:
        rng = np.random.default_rng(seed)
        x = rng.random(n + 1)
        a = self.sample_controls(n, rng)[0]
        return Trajectory(x[:, None], a[:, None], meta={"family": "minorized"})

    def dependence_gap_exact(self, window: int = 50, threshold: float = 0.7) -> float:
        """|P(A and B) - P(A)P(B)| for A = {first control upper} and
        B = {upper-half frequency over a later window >= threshold},
        by exact binomial tails."""
        need = math.ceil(threshold * window)
        tail = lambda p: sum(
            math.comb(window, k) * p**k * (1 - p) ** (window - k)
            for k in range(need, window + 1)
        )
        p_given_upper = tail(7 / 8)
        p_given_lower = tail(1 / 2)
        joint = 0.5 * p_given_upper
        marginal_b = 0.5 * (p_given_upper + p_given_lower)
        return abs(joint - 0.5 * marginal_b)

    def dependence_gap_estimate(
        self, n_reps: int = 100_000, window: int = 50, threshold: float = 0.7, seed=None
    ) -> tuple[float, float]:
        """Simulation counterpart of :meth:`dependence_gap_exact`."""
        rng = np.random.default_rng(seed)
        a = self.sample_controls(window, rng, reps=n_reps)
        event_a = a[:, 0] >= 0.5
        freq = (a[:, 1:] >= 0.5).mean(axis=1)
        event_b = freq >= threshold
        joint = (event_a & event_b).mean()
        gap = joint - event_a.mean() * event_b.mean()
        se = math.sqrt(max(joint * (1 - joint), 1e-12) / n_reps) * 2
        return abs(float(gap)), se

    def pair_cell_mass(self, x_lo, x_hi, a_lo, a_hi, n: int) -> float:
        """Exact running occupation of a rectangle, averaged over i < n."""
        vol_x = x_hi - x_lo
        first = a_hi - a_lo  # a_0 uniform
        lower_part = max(0.0, min(a_hi, 0.5) - a_lo)
        upper_part = max(0.0, a_hi - max(a_lo, 0.5))
        # P(a_i in [a_lo, a_hi]) for i >= 1: average of the two regimes
        later = 0.5 * (lower_part + upper_part) + 0.5 * (
            0.25 * lower_part + 1.75 * upper_part
        )
        return vol_x * (first + (n - 1) * later) / n

    def hit_rate_bounds(self, x_lo, x_hi, a_lo, a_hi) -> tuple[float, float]:
        """Min and max per-step hit probability of a rectangle, over the
        two conditioning regimes of the first control."""
        vol_x = x_hi - x_lo
        lower_part = max(0.0, min(a_hi, 0.5) - a_lo)
        upper_part = max(0.0, a_hi - max(a_lo, 0.5))
        plain = vol_x * (lower_part + upper_part)
        biased = vol_x * (0.25 * lower_part + 1.75 * upper_part)
        return min(plain, biased), max(plain, biased)


def make_minorized_process() -> MinorizedProcess:
    return MinorizedProcess()


# ---------------------------------------------------------------------------
# smooth sinusoidal kernel


class HolderKernel:
    """Transition density  c(t) * (1 + amp * sin(2 pi freq (t + y)))  with
    t the sum of state and control coordinates.

    For integer ``freq`` the normalizer ``c`` is identically 1.  States
    are one-dimensional; any number of control coordinates is allowed
    since they only enter through their sum.
    """

    def __init__(self, amplitude: float = 0.5, frequency: float = 1.0, d2: int = 1):
        if not 0 <= amplitude < 1:
            raise ChainSpecError(f"amplitude must be in (0, 1), got {amplitude}")
        self.amplitude = amplitude
        self.frequency = frequency
        self.d1 = 1
        self.d2 = d2

    def _normalizer(self, t):
        a, f = self.amplitude, self.frequency
        w = 2.0 * math.pi * f
        return 1.0 / (1.0 + a * (np.cos(w * t) - np.cos(w * (t + 1.0))) / w)

    def density(self, x, a_ctl, y):
        """Vectorized kernel on (k, d1), (k, d2), (k, d1) arrays."""
        t = np.asarray(x)[..., 0] + np.asarray(a_ctl).sum(axis=-1)
        w = 2.0 * math.pi * self.frequency
        return self._normalizer(t) * (
            1.0 + self.amplitude * np.sin(w * (t + np.asarray(y)[..., 0]))
        )

    def density_bounds(self) -> tuple[float, float]:
        cmax = float(self._normalizer(np.linspace(0, 1 + self.d2, 513)).max())
        cmin = float(self._normalizer(np.linspace(0, 1 + self.d2, 513)).min())
        return cmin * (1 - self.amplitude), cmax * (1 + self.amplitude)

    def sqrt_lipschitz_bound(self) -> float:
        """Per-coordinate Lipschitz constant of the kernel's square root
        (valid for integer frequencies, where the normalizer is 1)."""
        a, f = self.amplitude, self.frequency
        return math.pi * f * a / math.sqrt(1.0 - a)

    def sample_next(self, t: np.ndarray, rng) -> np.ndarray:
        """Inverse-CDF draws of the next state given t = x + sum(controls)."""
        a, f = self.amplitude, self.frequency
        w = 2.0 * math.pi * f
        c = self._normalizer(t)
        u = rng.random(t.shape)

        def cdf(y):
            return c * (y + a * (np.cos(w * t) - np.cos(w * (t + y))) / w)

        y = u.copy()
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(60):
            val = cdf(y) - u
            lo = np.where(val < 0, y, lo)
            hi = np.where(val >= 0, y, hi)
            deriv = c * (1.0 + a * np.sin(w * (t + y)))
            step = y - val / deriv
            y = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
            if np.max(np.abs(val)) < 1e-13:
                break
        return np.clip(y, 0.0, 1.0)

    def simulate(self, n: int, seed=None) -> Trajectory:
        return self.simulate_batch(n, 1, seed)[0]

    def simulate_batch(self, n: int, reps: int, seed=None) -> list[Trajectory]:
        rng = np.random.default_rng(seed)
        x = np.empty((reps, n + 1))
        controls = rng.random((reps, n + 1, self.d2))
        x[:, 0] = rng.random(reps)
        for i in range(n):
            t = x[:, i] + controls[:, i].sum(axis=-1)
            x[:, i + 1] = self.sample_next(t, rng)
        return [
            Trajectory(x[r][:, None], controls[r], meta={"family": "holder"})
            for r in range(reps)
        ]


def make_holder_kernel(
    amplitude: float = 0.5, frequency: float = 1.0, d2: int = 1
) -> HolderKernel:
    return HolderKernel(amplitude, frequency, d2)


# ---------------------------------------------------------------------------
# family registry for the CLI

FAMILY_NAMES = (
    "fully-connected",
    "inid",
    "assouad",
    "minorized",
    "comparison",
    "holder",
)


def build_family(name: str, seed=None, **params):
    makers = {
        "fully-connected": lambda: make_fully_connected(
            eps0=params.get("eps0", 0.5),
            n_state_cells=params.get("n_state_cells", 4),
            n_control_cells=params.get("n_control_cells", 4),
            seed=seed,
        ),
        "inid": lambda: make_inid_chain(),
        "assouad": lambda: make_assouad_chain(
            iota=params.get("iota", 0.4),
            eps=params.get("eps", 1.0 / 64.0),
        ),
        "minorized": lambda: make_minorized_process(),
        "comparison": lambda: make_comparison_chain(i0=params.get("i0", 8)),
        "holder": lambda: make_holder_kernel(
            amplitude=params.get("amplitude", 0.5),
            frequency=params.get("frequency", 1.0),
        ),
    }
    if name not in FAMILY_NAMES:
        raise ChainSpecError(
            f"unknown family {name!r}; choose from {sorted(FAMILY_NAMES)}"
        )
    return makers[name]()
