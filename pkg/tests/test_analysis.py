"""Bounds, error-model fitting, reach planning: checked against oracles."""
import math
from dataclasses import dataclass

import numpy as np
import pytest

from csmg.analysis import (
    DetectorLayout,
    ErrorModelFit,
    TwoQubitMoments,
    concurrence,
    direct_bounds,
    eof,
    eof_from_concurrence,
    fit_error_model,
    instance_probability,
    max_direct_length,
    naive_tomography_K,
    optimal_instance_probability,
    optimal_pp,
    predict_gamma,
    predicted_template_mean,
    rho_tilde_eigenvalues,
    splitter_settings,
    xi_e,
    xi_from_rates,
)
from csmg.templates import (
    CorrelatorEstimate,
    certifiable_lengths,
    make_template,
    zz_flip_pair_count,
)

from helpers import entropy_of_entanglement, rho_from_moments, wootters_concurrence


def _physical_triples(rng, count):
    out = []
    while len(out) < count:
        a, b, c = rng.uniform(-1, 1, 3)
        eigs = [(1 + s1 * a + s2 * b + s1 * s2 * c) / 4
                for s1 in (1, -1) for s2 in (1, -1)]
        if min(eigs) >= 0:
            out.append((a, b, c))
    return out


# ---------------------------------------------------------------------------
# Spectrum, concurrence, entanglement of formation.


def test_eigenvalue_examples():
    assert np.allclose(rho_tilde_eigenvalues(TwoQubitMoments(1, 1, 1)),
                       [1, 0, 0, 0])
    assert np.allclose(rho_tilde_eigenvalues(TwoQubitMoments(0, 0, 0)),
                       [0.25] * 4)
    assert np.allclose(rho_tilde_eigenvalues(TwoQubitMoments(0.5, 0.5, 0.5)),
                       [0.625, 0.125, 0.125, 0.125])


def test_eigenvalues_match_dense_diagonalization():
    rng = np.random.default_rng(41)
    for a, b, c in _physical_triples(rng, 200):
        dense = np.linalg.eigvalsh(rho_from_moments(a, b, c))[::-1]
        assert np.allclose(rho_tilde_eigenvalues(TwoQubitMoments(a, b, c)),
                           dense, atol=1e-12)


def test_concurrence_examples():
    assert concurrence(TwoQubitMoments(1, 1, 1)) == pytest.approx(1.0)
    third = 1 / 3
    assert concurrence(TwoQubitMoments(third, third, third)) == \
        pytest.approx(0.0, abs=1e-12)
    assert concurrence(TwoQubitMoments(0.6, 0.6, 0.6)) == pytest.approx(0.4)
    assert concurrence(TwoQubitMoments(0.2, 0.2, 0.2)) == 0.0


def test_concurrence_matches_spin_flip_oracle():
    rng = np.random.default_rng(42)
    for a, b, c in _physical_triples(rng, 1000):
        ours = concurrence(TwoQubitMoments(a, b, c))
        dense = wootters_concurrence(rho_from_moments(a, b, c))
        assert abs(ours - dense) < 1e-10


def test_moment_validation():
    with pytest.raises(ValueError):
        TwoQubitMoments(1.5, 0, 0)
    with pytest.raises(ValueError):
        TwoQubitMoments(0, -1.2, 0)


def test_unphysical_spectrum_is_clamped_not_rejected():
    # statistically possible: moments whose reconstructed spectrum dips
    # slightly negative; the pipeline clamps and renormalizes
    m = TwoQubitMoments(0.9, 0.9, -0.9)
    eigs = rho_tilde_eigenvalues(m)
    assert eigs[-1] < 0
    c = concurrence(m)
    assert 0.0 <= c <= 1.0
    assert eof(m) >= 0.0


def test_eof_endpoints_and_formula():
    assert eof_from_concurrence(0.0) == 0.0
    assert eof_from_concurrence(1.0) == pytest.approx(1.0)
    for c in (0.1, 0.4, 0.6, 0.99):
        assert eof_from_concurrence(c) == \
            pytest.approx(entropy_of_entanglement(c), abs=1e-12)


def test_eof_monotone_in_concurrence():
    grid = np.linspace(0, 1, 200)
    vals = [eof_from_concurrence(c) for c in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# Direct bound tables.


def _estimate(family, l, count, signed):
    return CorrelatorEstimate(template_id=f"{family}(l={l})", family=family,
                              l=l, match_count=count, signed_sum=signed,
                              overlap_fraction=0.0)


def test_direct_bounds_perfect_correlations():
    ests = [_estimate("Gamma1", 2, 1000, 1000),
            _estimate("Gamma2", 2, 1000, 1000)]
    table = direct_bounds(ests)
    row = table.rows[0]
    assert row.l == 2
    assert row.mu_gamma1 == 1.0
    assert row.mu_gamma2 == 1.0
    assert row.eof_central == pytest.approx(1.0)
    # conservative haircut bites even at mean 1 because stderr = 0 there
    assert row.eof_conservative == pytest.approx(1.0)
    assert table.xi_e == 2


def test_direct_bounds_at_the_threshold():
    # mu = 1/3 in all three moments is exactly separable
    ests = [_estimate("Gamma1", 2, 3000, 1000),
            _estimate("Gamma2", 2, 3000, 1000)]
    table = direct_bounds(ests)
    row = table.rows[0]
    assert row.eof_central == pytest.approx(0.0, abs=1e-12)
    assert row.eof_conservative == 0.0
    assert table.xi_e == 0


def test_direct_bounds_conservative_below_central():
    ests = [_estimate("Gamma1", 2, 400, 320),
            _estimate("Gamma2", 2, 500, 380)]
    table = direct_bounds(ests, z=1.96)
    row = table.rows[0]
    assert 0.0 < row.eof_conservative < row.eof_central
    wider = direct_bounds(ests, z=5.0).rows[0]
    assert wider.eof_conservative < row.eof_conservative


def test_direct_bounds_requires_both_families():
    with pytest.raises(ValueError):
        direct_bounds([_estimate("Gamma1", 2, 10, 10)], ls=[2])


def test_direct_bounds_selects_largest_positive_l():
    ests = [_estimate("Gamma1", 2, 4000, 3600),
            _estimate("Gamma2", 2, 4000, 3400),
            _estimate("Gamma1", 5, 4000, 2600),
            _estimate("Gamma2", 5, 4000, 2400),
            _estimate("Gamma1", 8, 4000, 600),
            _estimate("Gamma2", 8, 4000, 500)]
    table = direct_bounds(ests)
    assert [row.l for row in table.rows] == [2, 5, 8]
    assert table.xi_e == 5
    assert all(row.method == "direct" for row in table.rows)


# ---------------------------------------------------------------------------
# Decay predictions.


def test_predict_gamma_examples():
    assert predict_gamma("Gamma1", 8, 0.025, 0.0) == \
        pytest.approx((1 - 0.1 / 3) ** 8)
    assert predict_gamma("Gamma2", 8, 0.0, 0.01) == \
        pytest.approx(0.98 ** (16 / 3))
    assert predict_gamma("Gamma1", 2, 0.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        predict_gamma("Gamma1", 2, 0.76, 0.0)
    with pytest.raises(ValueError):
        predict_gamma("Gamma1", 2, 0.0, 0.51)


def test_predicted_template_mean_uses_integer_exponents():
    for fam in ("Gamma1", "Gamma2"):
        for l in (2, 5, 8, 11):
            t = make_template(fam, l)
            got = predicted_template_mean(t, 0.013, 0.021)
            want = ((1 - 4 * 0.013 / 3) ** t.n_measured
                    * (1 - 2 * 0.021) ** zz_flip_pair_count(t))
            assert got == pytest.approx(want, rel=1e-14)


def test_asymptotic_and_exact_forms_disagree_at_finite_l():
    # the extrapolation form uses exponent 2l/3 for the pair channel; the
    # stream's exact exponent differs by a constant, so the two must not
    # be conflated
    t = make_template("Gamma2", 2)
    exact = predicted_template_mean(t, 0.0, 0.02)
    asym = predict_gamma("Gamma2", 2, 0.0, 0.02)
    assert exact == pytest.approx(0.96 ** 4)
    assert asym == pytest.approx(0.96 ** (4 / 3))
    assert abs(exact - asym) > 0.05


# ---------------------------------------------------------------------------
# Error-model fit.


@dataclass(frozen=True)
class _FakeEstimate:
    template_id: str
    family: str
    l: int
    match_count: int
    mean: float
    stderr: float


def _exact_estimates(p_sigma, p_zz, ls=(2, 5, 8, 11)):
    out = []
    for fam in ("Gamma1", "Gamma2"):
        for l in ls:
            t = make_template(fam, l)
            mu = predicted_template_mean(t, p_sigma, p_zz)
            out.append(_FakeEstimate(template_id=t.id, family=fam, l=l,
                                     match_count=10 ** 12, mean=mu,
                                     stderr=0.0))
    return out


def test_fit_round_trips_exact_means():
    rng = np.random.default_rng(43)
    for _ in range(100):
        p_sigma = float(rng.uniform(0, 0.05))
        p_zz = float(rng.uniform(0, 0.05))
        fit = fit_error_model(_exact_estimates(p_sigma, p_zz))
        assert abs(fit.p_sigma - p_sigma) < 1e-10
        assert abs(fit.p_zz - p_zz) < 1e-10
        assert fit.chi2 == pytest.approx(0.0, abs=1e-16)


def test_fit_recovers_with_noisy_points():
    rng = np.random.default_rng(44)
    p_sigma, p_zz = 0.004, 0.012
    ests = []
    for fam in ("Gamma1", "Gamma2"):
        for l in (2, 5, 8):
            t = make_template(fam, l)
            mu = predicted_template_mean(t, p_sigma, p_zz)
            n = 50000
            signed = int(round(n * (mu + rng.normal(0, 0.002))))
            ests.append(_estimate(fam, l, n, signed))
    fit = fit_error_model(ests)
    assert abs(fit.p_sigma - p_sigma) < 4 * fit.stderr_p_sigma + 1e-4
    assert abs(fit.p_zz - p_zz) < 4 * fit.stderr_p_zz + 1e-4
    assert fit.n_points == 6
    assert fit.dof == 4


def test_fit_drops_nonpositive_means_and_reports_them():
    ests = _exact_estimates(0.002, 0.01, ls=(2, 5, 8))
    dead = _FakeEstimate(template_id="Gamma2(l=11)", family="Gamma2", l=11,
                         match_count=7, mean=-1.0, stderr=0.0)
    empty = _FakeEstimate(template_id="Gamma1(l=11)", family="Gamma1", l=11,
                          match_count=0, mean=float("nan"),
                          stderr=float("inf"))
    fit = fit_error_model(ests + [dead, empty])
    assert set(fit.dropped) == {"Gamma2(l=11)", "Gamma1(l=11)"}
    assert abs(fit.p_sigma - 0.002) < 1e-10


def test_fit_starved_exact_cell_cannot_dominate():
    # a 7-match cell whose matches all agreed carries finite weight
    ests = _exact_estimates(0.002, 0.01, ls=(2, 5, 8))
    starved = _FakeEstimate(template_id="Gamma2(l=11)", family="Gamma2",
                            l=11, match_count=7, mean=1.0, stderr=0.0)
    fit = fit_error_model(ests + [starved])
    # the exact points still pin the answer despite the biased cell
    assert abs(fit.p_sigma - 0.002) < 5e-4
    assert abs(fit.p_zz - 0.01) < 5e-4


def test_fit_needs_three_separations():
    with pytest.raises(ValueError):
        fit_error_model(_exact_estimates(0.01, 0.01, ls=(2, 5)))


def test_fit_gamma2_alone_is_degenerate():
    ests = [e for e in _exact_estimates(0.01, 0.01) if e.family == "Gamma2"]
    with pytest.raises(ValueError, match="cannot separate"):
        fit_error_model(ests)


def test_fit_gamma1_alone_is_solvable():
    ests = [e for e in _exact_estimates(0.013, 0.017) if e.family == "Gamma1"]
    fit = fit_error_model(ests)
    assert abs(fit.p_sigma - 0.013) < 1e-10
    assert abs(fit.p_zz - 0.017) < 1e-10


def test_fit_clamps_rates_to_physical_domain():
    # upward-fluctuating means (> noiseless) drive raw rates negative
    ests = [_FakeEstimate(template_id=f"G1:{l}", family="Gamma1", l=l,
                          match_count=10 ** 9, mean=min(1.0, 1.0 + 0.0),
                          stderr=1e-6)
            for l in (2, 5, 8)]
    fit = fit_error_model(ests)
    assert fit.p_sigma == 0.0
    assert fit.p_zz == 0.0


# ---------------------------------------------------------------------------
# Entanglement-length extrapolation.


def test_xi_pinned_values():
    cases = [
        # pure pair error: continuous crossing is 3*ln3 / (2*(-ln(1-2p)))
        (0.0, 0.05, 3 * math.log(3) / (2 * -math.log(0.9)), 14),
        (0.0, 0.01, 81.57, 80),
        (0.002, 0.01, 71.58, 71),
    ]
    for p_sigma, p_zz, want_cont, want_grid in cases:
        est = xi_from_rates(p_sigma, p_zz)
        assert est.continuous == pytest.approx(want_cont, abs=0.01)
        assert est.grid == want_grid


def test_xi_grid_brackets_the_threshold():
    rng = np.random.default_rng(45)
    for _ in range(50):
        p_sigma = float(rng.uniform(0, 0.02))
        p_zz = float(rng.uniform(0, 0.02))
        if p_sigma == 0.0 and p_zz == 0.0:
            continue
        est = xi_from_rates(p_sigma, p_zz)
        grid = int(est.grid)
        if grid >= 2:
            assert grid % 3 == 2
            assert predict_gamma("Gamma1", grid, p_sigma, p_zz) > 1 / 3
        follow = grid + 3 if grid >= 2 else 2
        assert predict_gamma("Gamma1", follow, p_sigma, p_zz) <= 1 / 3


def test_xi_noiseless_is_unbounded():
    est = xi_from_rates(0.0, 0.0)
    assert math.isinf(est.continuous)
    assert math.isinf(est.grid)


def test_xi_decreases_with_noise():
    vals = [xi_from_rates(p, 0.005).continuous
            for p in (0.001, 0.002, 0.004, 0.008)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_xi_stderr_matches_finite_differences():
    fit = fit_error_model(_exact_estimates(0.002, 0.001))
    cov = np.array([[4e-8, 1e-9], [1e-9, 2.5e-8]])
    fit = ErrorModelFit(p_sigma=fit.p_sigma, p_zz=fit.p_zz,
                        covariance=fit.covariance, chi2=fit.chi2,
                        dof=fit.dof, alpha=fit.alpha, beta=fit.beta,
                        cov_alpha_beta=cov, n_points=fit.n_points)
    est = xi_e(fit)
    # numerical gradient of the continuous crossing in (alpha, beta)
    def crossing(alpha, beta):
        num = math.log(1 / 3) - (8 / 3) * alpha
        return num / ((2 / 3) * (alpha + beta))
    a0, b0 = fit.alpha, fit.beta
    h = 1e-8
    da = (crossing(a0 + h, b0) - crossing(a0 - h, b0)) / (2 * h)
    db = (crossing(a0, b0 + h) - crossing(a0, b0 - h)) / (2 * h)
    grad = np.array([da, db])
    want = math.sqrt(grad @ cov @ grad)
    assert est.stderr_continuous == pytest.approx(want, rel=1e-5)


# ---------------------------------------------------------------------------
# Planning helpers.


def test_naive_tomography_pinned_values():
    assert naive_tomography_K(0.1, 1e10) == 6
    assert naive_tomography_K(0.5, 1e10) == 11
    assert naive_tomography_K(0.9, 1e10) == 15


def test_naive_tomography_cost_brackets_budget():
    rng = np.random.default_rng(46)
    for _ in range(200):
        p_d = float(rng.uniform(0.05, 0.99))
        budget = float(10 ** rng.uniform(3, 14))
        k = naive_tomography_K(p_d, budget)
        if k >= 1:
            assert 4.0 ** k / p_d ** k <= budget
        assert 4.0 ** (k + 1) / p_d ** (k + 1) > budget


def test_optimal_pp_and_splitter_settings():
    assert optimal_pp("Gamma1", 8) == pytest.approx(0.75)
    q_x, q_y, q_z = splitter_settings("Gamma1", 8)
    assert q_x == 0.0
    assert q_y == pytest.approx(0.75)
    assert q_z == pytest.approx(0.25)
    q_x, q_y, q_z = splitter_settings("Gamma2", 8)
    assert q_y == pytest.approx(0.5)
    assert q_x == pytest.approx(0.25)
    assert q_z == pytest.approx(0.25)
    assert q_x + q_y + q_z == pytest.approx(1.0)


def test_gamma2_needs_three_detectors():
    with pytest.raises(ValueError):
        splitter_settings("Gamma2", 8, layout=DetectorLayout.TWO_DETECTOR)
    with pytest.raises(ValueError):
        optimal_instance_probability("Gamma2", 8,
                                     p_d=0.5,
                                     layout=DetectorLayout.TWO_DETECTOR)


def test_instance_probability_example():
    # Gamma1(2) = Z Y Y Z at p_d = 1 with the balanced two-detector
    # splitter: (1/2)^4 = 1/16
    p = optimal_instance_probability("Gamma1", 2, 1.0)
    assert p == pytest.approx(1 / 16)
    assert instance_probability("Gamma1", 2, 1.0, 0.0, 0.5, 0.5) == \
        pytest.approx(1 / 16)


def test_compact_form_equals_general_product():
    for fam in ("Gamma1", "Gamma2"):
        for l in certifiable_lengths(50):
            for p_d in (0.3, 0.9):
                t = make_template(fam, l)
                p_p = optimal_pp(fam, l)
                q = splitter_settings(fam, l, p_p=p_p)
                general = instance_probability(fam, l, p_d, *q)
                compact = optimal_instance_probability(fam, l, p_d)
                assert general == pytest.approx(compact, rel=1e-12), (fam, l)


def test_optimal_pp_maximizes_instance_probability():
    rng = np.random.default_rng(47)
    for fam, l in (("Gamma1", 8), ("Gamma2", 11)):
        best = optimal_instance_probability(fam, l, 0.6)
        for _ in range(50):
            p_p = float(rng.uniform(0.01, 0.99))
            q = splitter_settings(fam, l, p_p=p_p)
            assert instance_probability(fam, l, 0.6, *q) <= best * (1 + 1e-12)


def test_max_direct_length_pinned_ranges():
    assert max_direct_length("Gamma2", 0.1, 1e10) == 5
    assert max_direct_length("Gamma2", 0.5, 1e10) == 20
    assert max_direct_length("Gamma2", 0.9, 1e10) == 77
    assert max_direct_length("Gamma1", 0.1, 1e10) == 8
    assert max_direct_length("Gamma1", 0.5, 1e10) == 29
    assert max_direct_length("Gamma1", 0.9, 1e10) == 176


def test_max_direct_length_monotone_in_detection():
    grid = np.arange(0.05, 1.0, 0.05)
    reach = [max_direct_length("Gamma2", p, 1e10) for p in grid]
    assert all(b >= a for a, b in zip(reach, reach[1:]))
    assert max_direct_length("Gamma2", 0.5, 1e2) <= 2
