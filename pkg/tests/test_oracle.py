import numpy as np
import pytest
from scipy import stats

from synthad.oracle import (
    MCEstimate,
    OracleProblem,
    SyntheticDensity,
    bayes_cell_values,
    bayes_classifier,
    bayes_risk,
    density_eval,
    eta,
    generalization_error,
    level_set_error,
    misclassification_risk,
    noise_profile,
    sample_labels,
    sample_mu,
    sample_Q,
)
from synthad.problems import named_problem


@pytest.fixture
def uniform():
    return named_problem("uniform-1d")


@pytest.fixture
def halfstep():
    return named_problem("halfstep-1d")


@pytest.fixture
def blocks():
    return named_problem("blocks-2d")


class TestSyntheticDensity:
    def test_mass_must_be_one(self):
        with pytest.raises(ValueError):
            SyntheticDensity(((0.0, 0.5, 1.0),), np.array([1.0, 1.5]))

    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            SyntheticDensity(((0.0, 0.5, 1.0),), np.array([3.0, -1.0]))

    def test_axis_must_span_unit_interval(self):
        with pytest.raises(ValueError):
            SyntheticDensity(((0.0, 0.5),), np.array([2.0]))

    def test_json_round_trip(self, blocks):
        dens = blocks.density
        again = SyntheticDensity.from_json(dens.to_json())
        assert again.breakpoints == dens.breakpoints
        assert np.array_equal(again.values, dens.values)

    def test_cell_index_boundary_closed_left(self, halfstep):
        dens = halfstep.density
        assert density_eval(dens, [0.25]) == 2.0
        assert density_eval(dens, [0.5]) == 0.0  # left-closed convention
        assert density_eval(dens, [1.0]) == 0.0  # 1 belongs to the last cell

    def test_uniform_density_everywhere_one(self, uniform):
        xs = np.random.default_rng(0).random((50, 1))
        assert np.all(density_eval(uniform.density, xs) == 1.0)

    def test_out_of_domain_rejected(self, uniform):
        with pytest.raises(ValueError):
            density_eval(uniform.density, [1.5])


class TestOracleProblem:
    def test_rho_positive(self, uniform):
        with pytest.raises(ValueError):
            OracleProblem(uniform.density, rho=0.0)

    def test_cell_value_equal_to_rho_rejected(self, uniform):
        with pytest.raises(ValueError):
            OracleProblem(uniform.density, rho=1.0)

    def test_s_formula(self, halfstep):
        assert halfstep.s == 0.5
        assert named_problem("halfstep-1d-rho3").s == 0.25


class TestEta:
    def test_boundary_value(self, uniform):
        # h = 1 everywhere, s = 2/3 here: eta = (2/3)/(2/3 + 1/3) = 2/3
        assert eta(uniform, [0.5]) == pytest.approx(2.0 / 3.0)

    def test_direct_arithmetic(self, halfstep):
        assert eta(halfstep, [0.25]) == pytest.approx(2.0 / 3.0)  # h=2, s=1/2

    def test_zero_density(self, halfstep):
        assert eta(halfstep, [0.75]) == 0.0


class TestSampling:
    def test_q_respects_zero_mass_cells(self, halfstep):
        xs = sample_Q(halfstep, 2000, seed=0)
        assert np.all(xs < 0.5)

    def test_q_uniform_matches_ks(self, uniform):
        xs = sample_Q(uniform, 10_000, seed=1)
        assert stats.kstest(xs[:, 0], "uniform").pvalue > 0.01

    def test_q_cell_frequencies_chi_square(self, blocks):
        n = 20_000
        xs = sample_Q(blocks, n, seed=2)
        idx = blocks.density.cell_index(xs)
        counts = np.zeros(blocks.density.values.shape)
        np.add.at(counts, idx, 1)
        expected = blocks.density.values * blocks.density.cell_volumes() * n
        assert stats.chisquare(counts.ravel(), expected.ravel()).pvalue > 0.01

    def test_mu_is_uniform_on_cube(self):
        xs = sample_mu(2, 10_000, seed=3)
        assert xs.shape == (10_000, 2)
        assert stats.kstest(xs[:, 1], "uniform").pvalue > 0.01

    def test_labels_zero_eta_all_negative(self, halfstep):
        xs = np.linspace(0.55, 0.95, 200)[:, None]  # h = 0 region
        assert np.all(sample_labels(halfstep, xs, seed=4) == -1)

    def test_labels_binomial_fraction(self, halfstep):
        xs = np.linspace(0.01, 0.49, 10_000)[:, None]  # eta = 2/3 region
        labels = sample_labels(halfstep, xs, seed=5)
        frac = np.mean(labels == 1)
        assert abs(frac - 2.0 / 3.0) <= 4.0 * np.sqrt(2.0 / 9.0) / 100.0


class TestBayes:
    def test_classifier_cells(self, halfstep):
        assert bayes_classifier(halfstep, [0.25]) == 1  # h=2 > rho=1
        assert bayes_classifier(halfstep, [0.75]) == -1  # h=0

    def test_dual_form_agreement_random_points(self, blocks):
        xs = np.random.default_rng(6).random((10_000, 2))
        out = bayes_classifier(blocks, xs)  # raises internally on disagreement
        assert np.all(np.isin(out, (-1, 1)))

    def test_worked_bayes_risks(self):
        assert bayes_risk(named_problem("uniform-1d")) == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert bayes_risk(named_problem("halfstep-1d")) == pytest.approx(0.25, abs=1e-9)
        assert bayes_risk(named_problem("halfstep-1d-rho3")) == pytest.approx(0.25, abs=1e-9)


class TestMisclassificationRisk:
    def test_bayes_classifier_attains_bayes_risk(self, blocks):
        f = lambda X: bayes_classifier(blocks, X)
        assert misclassification_risk(f, blocks, mode="exact") == pytest.approx(
            bayes_risk(blocks), abs=1e-6
        )

    def test_constant_plus_one(self, halfstep):
        f = lambda X: np.ones(len(X))
        assert misclassification_risk(f, halfstep, mode="exact") == pytest.approx(
            1.0 - halfstep.s, abs=1e-6
        )

    def test_constant_minus_one(self, halfstep):
        f = lambda X: -np.ones(len(X))
        assert misclassification_risk(f, halfstep, mode="exact") == pytest.approx(
            halfstep.s, abs=1e-6
        )

    def test_cell_constant_array_form(self, blocks):
        f_cells = bayes_cell_values(blocks)
        assert misclassification_risk(f_cells, blocks) == pytest.approx(
            bayes_risk(blocks), abs=1e-12
        )

    def test_mc_agrees_with_exact(self, blocks):
        f = lambda X: X[:, 0] + X[:, 1] - 0.9
        exact = misclassification_risk(f, blocks, mode="exact")
        mc = misclassification_risk(f, blocks, mode="mc", n_mc=100_000, seed=7)
        assert isinstance(mc, MCEstimate)
        assert abs(mc.value - exact) <= 4.0 * mc.stderr + 1e-4

    def test_bad_mode_rejected(self, blocks):
        with pytest.raises(ValueError):
            misclassification_risk(lambda X: X[:, 0], blocks, mode="magic")


class TestGeneralizationError:
    def test_zero_function(self, halfstep):
        f = lambda X: np.zeros(len(X))
        assert generalization_error(f, halfstep, mode="exact") == pytest.approx(1.0, abs=1e-6)

    def test_bayes_equals_twice_bayes_risk(self, blocks):
        assert generalization_error(bayes_cell_values(blocks), blocks) == pytest.approx(
            2.0 * bayes_risk(blocks), abs=1e-12
        )

    def test_constant_plus_one(self, halfstep):
        ones = np.ones_like(halfstep.density.values)
        assert generalization_error(ones, halfstep) == pytest.approx(
            2.0 * (1.0 - halfstep.s), abs=1e-12
        )

    def test_mc_mode(self, blocks):
        f = lambda X: X[:, 0] - 0.5
        exact = generalization_error(f, blocks, mode="exact")
        mc = generalization_error(f, blocks, mode="mc", n_mc=100_000, seed=8)
        assert abs(mc.value - exact) <= 4.0 * mc.stderr + 1e-3


class TestLevelSetError:
    def test_bayes_has_zero_error(self, blocks):
        assert level_set_error(bayes_cell_values(blocks), blocks) == 0.0

    def test_constant_plus_one(self, halfstep):
        ones = np.ones_like(halfstep.density.values)
        assert level_set_error(ones, halfstep) == pytest.approx(0.5, abs=1e-12)

    def test_constant_minus_one(self, halfstep):
        minus = -np.ones_like(halfstep.density.values)
        assert level_set_error(minus, halfstep) == pytest.approx(0.5, abs=1e-12)

    def test_mc_callable(self, halfstep):
        f = lambda X: np.ones(len(X))
        est = level_set_error(f, halfstep, n_mc=100_000, seed=9)
        assert abs(est.value - 0.5) <= 4.0 * est.stderr

    def test_zero_equivalence_with_risk(self, blocks):
        fc = bayes_cell_values(blocks)
        perturbed = fc.copy()
        perturbed[0, 1] *= -1.0
        r_star = bayes_risk(blocks)
        for f in (fc, perturbed, np.ones_like(fc), -np.ones_like(fc)):
            s_err = level_set_error(f, blocks)
            risk = misclassification_risk(f, blocks)
            assert (s_err == 0.0) == (abs(risk - r_star) < 1e-12)


class TestNoiseProfile:
    def test_plateau_reports_q_zero(self):
        # h = 1 with s = 1/2 would sit at eta = 1/2 everywhere, but rho = 1 is
        # excluded; a two-cell near-flat density still plateaus immediately
        dens = SyntheticDensity(((0.0, 0.5, 1.0),), np.array([1.02, 0.98]))
        prob = OracleProblem(dens, rho=1.0)
        profile = noise_profile(prob, np.linspace(0.02, 0.5, 50))
        assert profile.q == 0.0
        assert np.allclose(profile.curve, profile.curve[-1])

    def test_hard_margin_reports_q_infinite(self):
        # eta in {0.2, 0.8}: h = 4 on a 0.2-wide cell, 0.25 elsewhere (s = 1/2)
        dens = SyntheticDensity(((0.0, 0.2, 1.0),), np.array([4.0, 0.25]))
        prob = OracleProblem(dens, rho=1.0)
        profile = noise_profile(prob, np.linspace(0.01, 0.29, 29))
        assert profile.q == np.inf
        assert np.all(profile.curve == 0.0)

    def test_staircase_fits_q_near_one(self):
        # margins start at 0.04, so the grid starts above that; the log-log
        # fit over a staircase of 10 steps carries quantization bias
        prob = named_problem("staircase-1d")
        t_grid = np.linspace(0.05, 0.5, 500)
        profile = noise_profile(prob, t_grid)
        assert abs(profile.q - 1.0) <= 0.25
        # the curve itself is linear in t up to one 0.1-mass quantization step
        expected = np.clip(2.5 * t_grid, 0.0, 1.0)
        assert np.max(np.abs(profile.curve - expected)) <= 0.1 + 1e-12

    def test_grid_below_smallest_margin_reports_hard_margin(self):
        prob = named_problem("staircase-1d")
        assert noise_profile(prob, np.linspace(0.01, 0.5, 500)).q == np.inf

    def test_bad_grid_rejected(self, blocks):
        with pytest.raises(ValueError):
            noise_profile(blocks, [0.2, 0.1])


class TestComparisonTheorem:
    def test_random_cell_constant_classifiers(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            k = int(rng.integers(2, 6))
            bps = np.sort(rng.random(k - 1))
            bps = tuple([0.0] + list(bps) + [1.0])
            widths = np.diff(bps)
            raw = rng.random(k) + 0.05
            values = raw / np.sum(raw * widths)
            rho = float(rng.uniform(0.3, 2.0))
            while np.any(values == rho):
                rho *= 1.0000001
            prob = OracleProblem(SyntheticDensity((bps,), values), rho=rho)
            fc = bayes_cell_values(prob)
            eps_fc = generalization_error(fc, prob)
            r_star = bayes_risk(prob)
            f = rng.uniform(-1.0, 1.0, size=k)
            lhs = misclassification_risk(f, prob) - r_star
            rhs = generalization_error(f, prob) - eps_fc
            assert lhs <= rhs + 1e-9
