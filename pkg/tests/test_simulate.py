"""Chain families: construction invariants and closed-form auxiliaries."""

import math
from fractions import Fraction

import numpy as np
import pytest

from cmchist.errors import ChainSpecError
from cmchist.simulate import (
    FAMILY_NAMES,
    FiniteCMCSpec,
    HolderKernel,
    IIDControls,
    InidChain,
    MarkovControls,
    MinorizedProcess,
    TimeVaryingControls,
    build_family,
    make_assouad_chain,
    make_comparison_chain,
    make_fully_connected,
)


class TestFiniteSpec:
    def test_rows_must_integrate_to_one(self):
        density = np.ones((2, 2, 2))
        density[0, 0, :] = [0.5, 0.7]  # integrates to 0.6, not 1
        with pytest.raises(ChainSpecError):
            FiniteCMCSpec(density, IIDControls(np.array([0.5, 0.5])), np.array([0.5, 0.5]))

    def test_negative_density_rejected(self):
        density = np.ones((2, 2, 2))
        density[1, 1, :] = [-0.5, 2.5]
        with pytest.raises(ChainSpecError):
            FiniteCMCSpec(density, IIDControls(np.array([0.5, 0.5])), np.array([0.5, 0.5]))

    def test_same_seed_same_trajectory(self, small_chain):
        a = small_chain.simulate(50, seed=42)
        b = small_chain.simulate(50, seed=42)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.controls, b.controls)

    def test_different_seed_differs(self, small_chain):
        a = small_chain.simulate(50, seed=1)
        b = small_chain.simulate(50, seed=2)
        assert not np.array_equal(a.states, b.states)

    def test_trajectory_in_unit_cube(self, small_chain):
        assert small_chain.simulate(200, seed=5).in_unit_cube()

    def test_deterministic_flip_kernel(self):
        # density sends low states up and high states down, always
        density = np.zeros((2, 1, 2))
        density[0, 0, 1] = 2.0
        density[1, 0, 0] = 2.0
        spec = FiniteCMCSpec(density, IIDControls(np.array([1.0])), np.array([1.0, 0.0]))
        for seed in (0, 1, 99):
            traj = spec.simulate(40, seed=seed)
            cells = (traj.states[:, 0] >= 0.5).astype(int)
            assert all(cells[:-1] != cells[1:]), "states must alternate"

    def test_marginals_match_empirical(self, small_chain):
        # exact forward-recursion pair laws vs a batch of simulations
        laws = small_chain.pair_marginals(6)
        marg = laws[5].sum(axis=1)  # state law at time 5
        counts = np.zeros(2)
        reps = 400
        for seed in range(reps):
            traj = small_chain.simulate(5, seed=seed)
            counts[int(traj.states[5, 0] >= 0.5)] += 1
        freq = counts / reps
        se = np.sqrt(marg * (1 - marg) / reps).max()
        assert np.abs(freq - marg).max() <= 4 * se + 1e-9

    def test_dyadic_kernel_matches_density(self, small_chain):
        kernel = small_chain.dyadic_kernel()
        fn = small_chain.density_function()
        rng = np.random.default_rng(3)
        pts = rng.random((50, 3))
        vals = fn(pts[:, :1], pts[:, 1:2], pts[:, 2:])
        for p, v in zip(pts, vals):
            assert kernel(p[0], p[1], p[2]) == pytest.approx(v)

    def test_dyadic_kernel_needs_power_of_two(self):
        spec = make_assouad_chain(0.4, 1 / 64)  # 12x3 grid
        with pytest.raises(ChainSpecError):
            spec.dyadic_kernel()


class TestControlRules:
    def test_markov_controls_validation(self):
        with pytest.raises(ChainSpecError):
            MarkovControls(np.array([0.5, 0.5]))  # not 2-d
        with pytest.raises(ChainSpecError):
            MarkovControls(np.array([[0.5, 0.4]]))  # row not a law
        # table rows must cover every state cell
        density = np.ones((2, 2, 2))
        with pytest.raises(ChainSpecError):
            FiniteCMCSpec(
                density, MarkovControls(np.array([[0.5, 0.5]])), np.array([0.5, 0.5])
            )

    def test_time_varying_schedule(self):
        density = np.ones((2, 2, 2))
        rows = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        spec = FiniteCMCSpec(
            density, TimeVaryingControls(lambda i: rows[i % 2]), np.array([0.5, 0.5])
        )
        traj = spec.simulate(6, seed=0)
        # even steps draw from the first row: always the low cell
        assert traj.controls[0, 0] < 0.5
        assert traj.controls[1, 0] >= 0.5
        with pytest.raises(ChainSpecError):
            TimeVaryingControls(rows)  # a bare list is not a schedule


class TestFullyConnected:
    def test_extras(self):
        spec = make_fully_connected(0.3, 4, 4, seed=2)
        assert spec.extras["eps0"] == 0.3
        assert spec.extras["kappa"] >= 0.3
        assert spec.extras["support_volume"] == 1.0
        assert spec.extras["c_delta"] > 0
        assert spec.extras["c_p"] > 0

    def test_density_floor(self):
        spec = make_fully_connected(0.3, 4, 4, seed=2)
        assert spec.density.min() >= 0.3 - 1e-12


class TestInid:
    def test_deterministic(self):
        a = InidChain().simulate(64)
        b = InidChain().simulate(64)
        np.testing.assert_array_equal(a.states, b.states)

    def test_closed_form_fractions(self):
        chain = InidChain()
        expected = {4: Fraction(1, 4), 8: Fraction(5, 16), 16: Fraction(3, 16),
                    31: Fraction(21, 62), 64: Fraction(11, 64)}
        for n, want in expected.items():
            got = chain.closed_form_occupation(n)
            assert isinstance(got, Fraction)
            assert got == want

    def test_realized_matches_simulation(self):
        chain = InidChain()
        for n in (8, 16, 64):
            traj = chain.simulate(n)
            pairs = traj.pair_matrix()
            hits = np.sum((pairs[:, 0] >= 0.5) & (pairs[:, 1] >= 0.5))
            assert Fraction(int(hits), n) == chain.realized_occupation(n)


class TestAssouad:
    def test_stationary_block_structure(self):
        spec = make_assouad_chain(0.4, 1 / 64)
        pi = np.asarray(spec.extras["stationary_state_mass"])
        assert pi.shape == (12,)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        # the first third of the state cells share one stationary value
        assert np.allclose(pi[:4], pi[0])

    def test_rho_star_numbers(self):
        spec = make_assouad_chain(0.4, 1 / 64)
        assert spec.extras["rho_star_first_block"] == pytest.approx(1 / 30, abs=1e-12)
        # 9(1 - iota) / (2 d1 d2) with iota=0.4, d1=12, d2=3
        assert spec.extras["rho_star_reference_bound"] == pytest.approx(0.075)

    def test_covering_threshold(self):
        spec = make_assouad_chain(0.4, 1 / 64)
        want = 12 * 3 / (6 * 0.4) * math.log(12 * 3 / 3)
        assert spec.extras["covering_threshold"] == pytest.approx(want, rel=1e-12)

    def test_rows_integrate(self):
        spec = make_assouad_chain(0.4, 1 / 64)
        s = spec.density.shape[0]
        sums = spec.density.sum(axis=2) / s
        assert np.allclose(sums, 1.0, atol=1e-12)


class TestComparison:
    def test_homogeneous_head(self):
        spec = make_comparison_chain(1)
        assert spec.extras["r_n"](10) == pytest.approx(0.0, abs=1e-15)

    def test_nu_density_two_on_diagonal(self):
        spec = make_comparison_chain(4)
        nu = np.asarray(spec.extras["nu_pair_mass"])
        # two diagonal quadrants carry mass 1/2 each: density 2
        assert nu[0, 0] == pytest.approx(0.5)
        assert nu[1, 1] == pytest.approx(0.5)
        assert nu[0, 1] == nu[1, 0] == 0.0

    def test_nu_n_is_the_linear_mixture(self):
        spec = make_comparison_chain(4)
        nu_n = spec.extras["nu_n_pair_mass"]
        nu0 = np.asarray(spec.extras["nu0_pair_mass"])
        nu = np.asarray(spec.extras["nu_pair_mass"])
        for n in (4, 8, 20):
            want = (4 / n) * nu0 + (1 - 4 / n) * nu
            np.testing.assert_allclose(nu_n(n), want, atol=1e-14)

    def test_r_n_shrinks_like_one_over_n(self):
        spec = make_comparison_chain(4)
        r = spec.extras["r_n"]
        # TV(nu0, nu) = (3/4)|1/4 - 1/2| = 3/16, so r(8) = (4/8)(3/16)
        assert r(8) == pytest.approx(3 / 32)
        assert r(16) == pytest.approx(r(8) / 2)


class TestMinorized:
    def test_frozen_hit_rates(self):
        mp = MinorizedProcess()
        low, high = mp.hit_rate_bounds(0.5, 1.0, 0.5, 1.0)
        assert Fraction(low).limit_denominator(64) == Fraction(1, 4)
        assert Fraction(high).limit_denominator(64) == Fraction(7, 16)

    def test_pair_cell_mass_closed_form(self):
        # first pair is uniform (mass 1/4 on the upper quadrant); later
        # pairs carry the biased control, mass (1/2)(11/16) = 11/32
        mp = MinorizedProcess()
        for n in (1, 2, 4, 10, 100):
            want = (Fraction(1, 4) + (n - 1) * Fraction(11, 32)) / n
            assert mp.pair_cell_mass(0.5, 1.0, 0.5, 1.0, n) == pytest.approx(float(want), abs=1e-15)

    def test_control_density_split(self):
        mp = MinorizedProcess()
        # the retained-uniform floor is 1/4 everywhere
        assert mp.retention == 0.25
        assert mp.control_density(0.1, first_in_upper=True) == pytest.approx(0.25)
        assert mp.control_density(0.9, first_in_upper=True) == pytest.approx(1.75)

    def test_sample_controls_shape_and_range(self, rng):
        mp = MinorizedProcess()
        batch = mp.sample_controls(20, rng, reps=5)
        assert batch.shape == (5, 21)
        assert np.all((batch >= 0) & (batch <= 1))

    def test_dependence_gap_exact(self):
        mp = MinorizedProcess()
        gap = mp.dependence_gap_exact(window=50, threshold=0.7)
        assert gap >= 0.2


class TestHolder:
    def test_zero_amplitude_is_uniform(self):
        hk = HolderKernel(0.0, 1.0)
        rng = np.random.default_rng(0)
        pts = rng.random((20, 3))
        vals = hk.density(pts[:, :1], pts[:, 1:2], pts[:, 2:])
        np.testing.assert_allclose(vals, 1.0, atol=1e-14)

    def test_density_bounds(self):
        hk = HolderKernel(0.5, 1.0)
        lo, hi = hk.density_bounds()
        assert lo == pytest.approx(0.5, abs=1e-9)
        assert hi == pytest.approx(1.5, abs=1e-9)

    def test_rows_integrate_to_one(self):
        hk = HolderKernel(0.5, 2.0)
        rng = np.random.default_rng(1)
        nodes, weights = np.polynomial.legendre.leggauss(24)
        y = (nodes + 1) / 2
        w = weights / 2
        for _ in range(25):
            x, a = rng.random(2)
            vals = hk.density(np.full((24, 1), x), np.full((24, 1), a), y.reshape(-1, 1))
            assert float(vals @ w) == pytest.approx(1.0, abs=1e-10)

    def test_sqrt_lipschitz_bound_holds_on_grid(self):
        hk = HolderKernel(0.5, 1.0)
        bound = hk.sqrt_lipschitz_bound()
        g = np.linspace(0, 1, 41)
        x = np.full((41, 1), 0.3)
        a = np.full((41, 1), 0.6)
        roots = np.sqrt(hk.density(x, a, g.reshape(-1, 1)))
        slopes = np.abs(np.diff(roots)) / np.diff(g)
        assert slopes.max() <= bound + 1e-9

    def test_simulation_in_cube(self):
        hk = HolderKernel(0.5, 1.0)
        traj = hk.simulate(300, seed=4)
        assert traj.in_unit_cube()

    def test_batch_reproducible(self):
        hk = HolderKernel(0.5, 1.0)
        a = hk.simulate_batch(50, 3, seed=7)
        b = hk.simulate_batch(50, 3, seed=7)
        for t1, t2 in zip(a, b):
            np.testing.assert_array_equal(t1.states, t2.states)


class TestBuildFamily:
    def test_known_names(self):
        assert "assouad" in FAMILY_NAMES
        for name in FAMILY_NAMES:
            built = build_family(name)
            assert built is not None

    def test_unknown_name(self):
        with pytest.raises(ChainSpecError):
            build_family("bogus")
