import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cviqp.circuit import CircuitSpec, GridSpec, TabulatedPhase, default_grid
from cviqp.exceptions import BudgetExceededError
from cviqp.integrator import (
    binned_amplitude,
    exact_probability_sinc_1d,
    gaussian_closed_form,
    oscillation_scale,
    riemann_amplitude,
    squeezed_amplitude_grid,
    squeezed_amplitude_mc,
)
from cviqp.polynomial import Polynomial, random_polynomial


def homotopy_closed_form(p, s, sigma, delta_p, steps=400):
    """Independent oracle: follow det(A(t))^(-1/2) continuously from t = 0 to 1.

    ``A(t) = I / sigma^2 - 2 i t M`` uses the full determinant (no eigenbasis)
    and picks, at every step, the square root nearest the previous one.
    """
    c0, b, M = p.quadratic_form()
    n = p.n_vars
    eye = np.eye(n) / sigma**2
    root = sigma ** (-n)  # sqrt(det(I / sigma^2)) at t = 0
    for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
        det = np.linalg.det(eye - 2j * t * M)
        cand = cmath.sqrt(det)
        root = cand if abs(cand - root) <= abs(cand + root) else -cand
    A = eye - 2j * M
    beta = 1j * (b - np.asarray(s))
    integral = (2 * math.pi) ** (n / 2) / root * np.exp(0.5 * beta @ np.linalg.solve(A, beta))
    pref = (delta_p / (math.pi**1.5 * sigma)) ** (n / 2)
    return complex(pref * cmath.exp(1j * c0) * integral)


def test_ideal_zero_phase_is_one_on_period():
    est = riemann_amplitude(Polynomial.zero(2), [0, 0], GridSpec(math.pi, 7))
    assert est.value == pytest.approx(1.0, abs=1e-14)
    off = riemann_amplitude(Polynomial.zero(2), [1, 2], GridSpec(math.pi, 7))
    assert abs(off.value) < 1e-14


def test_squeezed_vacuum_value():
    # frozen oracle: (2 dp sigma / sqrt(pi))^(1/2) at sigma = 1, dp = 0.01
    c = CircuitSpec(1, Polynomial.zero(1), 0.01, 1.0)
    est = squeezed_amplitude_grid(c, [0.0], GridSpec(8.0, 10))
    assert est.value.real == pytest.approx(0.10623, abs=5e-6)
    assert est.value.real == pytest.approx(math.sqrt(0.02 / math.sqrt(math.pi)), rel=1e-9)
    assert est.eps_a < 1e-12


def test_one_mode_quadratic_against_textbook_gaussian():
    a, b, s, sigma, dp = 0.4, -0.3, 0.2, 1.3, 0.01
    p = Polynomial(1, {(2,): a, (1,): b})
    z = 1 / (2 * sigma**2) - 1j * a
    ref = cmath.sqrt(math.pi / z) * cmath.exp(-((b - s) ** 2) / (4 * z))
    ref *= math.sqrt(dp / (math.pi**1.5 * sigma))
    assert gaussian_closed_form(p, [s], sigma, dp) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_form_matches_homotopy(seed, n):
    p = random_polynomial(n, 2, 1.5, seed=seed, gate_set=False)
    s = np.random.default_rng(seed).uniform(-1, 1, n)
    ref = homotopy_closed_form(p, s, 1.7, 0.01)
    assert gaussian_closed_form(p, s, 1.7, 0.01) == pytest.approx(ref, rel=1e-10)


def test_closed_form_rejects_cubic():
    with pytest.raises(ValueError, match="degree > 2"):
        gaussian_closed_form(Polynomial(1, {(3,): 1.0}), [0.0], 1.0, 0.01)


def test_grid_matches_closed_form_two_modes():
    p = random_polynomial(2, 2, 0.5, seed=3, gate_set=False)
    c = CircuitSpec(2, p, 0.01, 1.0)
    g = default_grid(c, 1e-8)
    est = squeezed_amplitude_grid(c, [0.3, -0.2], g)
    ref = gaussian_closed_form(p, [0.3, -0.2], 1.0, 0.01)
    assert abs(est.value - ref) <= 1e-6 * abs(ref)


def test_threads_do_not_change_bits():
    p = random_polynomial(3, 3, 0.5, seed=11)
    c = CircuitSpec(3, p, 0.01, 1.0)
    g = GridSpec(5.0, 7)  # 2**21 points in 32 chunks
    a = squeezed_amplitude_grid(c, [0.1, 0.2, 0.3], g, threads=1).value
    b = squeezed_amplitude_grid(c, [0.1, 0.2, 0.3], g, threads=4).value
    assert a == b


def test_richardson_estimate_is_reported():
    c = CircuitSpec(1, Polynomial(1, {(3,): 0.3}), 0.01, 1.0)
    g = GridSpec(6.0, 5)
    est = squeezed_amplitude_grid(c, [0.0], g, richardson=True)
    fine = squeezed_amplitude_grid(c, [0.0], GridSpec(6.0, 9))
    assert math.isfinite(est.eps_b)
    assert abs(est.value - fine.value) <= est.eps_b + 1e-15
    assert math.isnan(squeezed_amplitude_grid(c, [0.0], g).eps_b)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceededError):
        riemann_amplitude(Polynomial.zero(2), [0, 0], GridSpec(1.0, 8), budget=1000)


def test_tabulated_phase_sum():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 2 * math.pi, 64)
    g = GridSpec(1.0, 3)
    est = riemann_amplitude(TabulatedPhase(vals), [0.0, 0.0], g, n_modes=2)
    ref = (g.delta_q / (2 * math.pi)) ** 2 * np.exp(1j * vals).sum()
    assert est.value == pytest.approx(ref, abs=1e-15)


def test_binned_counts_and_error_bound():
    p = random_polynomial(2, 3, 1.0, seed=4)
    g = GridSpec(2.0, 6)
    exact = riemann_amplitude(p, [0.2, 0.1], g).value
    for l in range(2, 7):
        est, report = binned_amplitude(p, [0.2, 0.1], g, l)
        assert report.total == g.n_points(2)
        assert abs(est.value - exact) <= est.eps_c
    with pytest.raises(ValueError):
        binned_amplitude(p, [0, 0], g, 0)


def test_monte_carlo_is_seeded_and_consistent():
    p = random_polynomial(2, 3, 0.5, seed=5)
    c = CircuitSpec(2, p, 0.01, 1.0)
    a = squeezed_amplitude_mc(c, [0.0, 0.0], 20_000, seed=1)
    b = squeezed_amplitude_mc(c, [0.0, 0.0], 20_000, seed=1)
    assert a.value == b.value
    grid = squeezed_amplitude_grid(c, [0.0, 0.0], default_grid(c)).value
    assert abs(a.value - grid) <= 5 * a.mc_stderr
    with pytest.raises(ValueError):
        squeezed_amplitude_mc(c, [0.0, 0.0], 20_000, seed=None)
    with pytest.raises(ValueError):
        squeezed_amplitude_mc(c, [0.0, 0.0], 10, seed=1)


def test_sinc_probability_against_window_integral():
    # P(s) = (1 / (2 pi N)) int_{s-dp}^{s+dp} |int u(q) exp(-i p q) dq|^2 dp
    c = CircuitSpec(1, Polynomial(1, {(3,): 0.2, (2,): 0.1}), 0.2, 1.0)
    g = GridSpec(8.0, 10)
    s = 0.4
    q = g.nodes()
    u = np.exp(1j * c.phase.evaluate_many(q[:, None]) - q**2 / 2)
    ps = np.linspace(s - c.delta_p, s + c.delta_p, 2001)
    ft = np.exp(-1j * np.outer(ps, q)) @ u * g.delta_q
    window = np.trapezoid(np.abs(ft) ** 2, ps)
    ref = window / (2 * math.pi * math.sqrt(math.pi))
    assert exact_probability_sinc_1d(c, s, g) == pytest.approx(ref, rel=1e-6)


def test_sinc_probability_approaches_squeezed_for_small_dp():
    c = CircuitSpec(1, Polynomial(1, {(3,): 0.3}), 1e-3, 1.0)
    g = default_grid(c, 1e-8)
    approx = squeezed_amplitude_grid(c, [0.5], g).probability
    assert exact_probability_sinc_1d(c, 0.5, g) == pytest.approx(approx, rel=1e-3)


def test_oscillation_scale_values():
    assert oscillation_scale(Polynomial(1, {(3,): 1.0})) == pytest.approx(math.sqrt(2 * math.pi / 3), rel=1e-12)
    assert oscillation_scale(Polynomial(1, {(2,): 1.0})) == pytest.approx(math.pi, rel=1e-12)
    assert oscillation_scale(Polynomial(1, {(1,): 7.0, (2,): 1.0})) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 2.0))
def test_displacement_equals_outcome_shift(r, s, sigma):
    p = Polynomial(1, {(3,): 0.2, (2,): -0.3})
    c = CircuitSpec(1, p, 0.01, sigma)
    g = GridSpec(6 * sigma, 8)
    moved = CircuitSpec(1, p.subtract_linear([r]), 0.01, sigma)
    a = squeezed_amplitude_grid(moved, [s], g).value
    b = squeezed_amplitude_grid(c, [s + r], g).value
    assert abs(a - b) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3))
def test_real_phase_parity(s):
    # even real phase: A(s) = A(-s), checked where the lattice is symmetric enough
    p = Polynomial(1, {(2,): 0.25})
    c = CircuitSpec(1, p, 0.01, 1.0)
    g = GridSpec(9.0, 11)
    a = squeezed_amplitude_grid(c, [s], g).value
    b = squeezed_amplitude_grid(c, [-s], g).value
    assert abs(a - b) < 1e-10


def test_binned_single_bin_concentration():
    g = GridSpec(1.0, 4)
    zero, rep0 = binned_amplitude(Polynomial.zero(2), [0, 0], g, 3)
    assert rep0.counts[0] == g.n_points(2) and rep0.counts[1:].sum() == 0
    assert zero.value == pytest.approx((2 * g.L / (2 * math.pi)) ** 2)
    phi = 2 * math.pi * (5 + 0.5) / 8
    const, rep = binned_amplitude(Polynomial(2, {(0, 0): phi}), [0, 0], g, 3)
    assert rep.counts[5] == g.n_points(2)
    assert const.value == pytest.approx(np.exp(2j * math.pi * 5 / 8) * (2 * g.L / (2 * math.pi)) ** 2)


def test_large_sigma_approaches_ideal_sum():
    p = Polynomial(1, {(3,): 0.7, (1,): 0.2})
    g = GridSpec(1.0, 8)
    c = CircuitSpec(1, p, 1e-4, 1e3)
    sq = squeezed_amplitude_grid(c, [0.1], g).value
    ideal = riemann_amplitude(p, [0.1], g).value
    pref = math.sqrt(c.delta_p / (math.pi**1.5 * c.sigma))
    assert sq == pytest.approx(pref * 2 * math.pi * ideal, rel=1e-6)


def test_zero_phase_monte_carlo_is_exact():
    c = CircuitSpec(2, Polynomial.zero(2), 0.01, 1.0)
    est = squeezed_amplitude_mc(c, [0.0, 0.0], 500, seed=0)
    assert est.value == pytest.approx(2 * 0.01 / math.sqrt(math.pi), rel=1e-14)
    assert est.mc_stderr == 0.0


def test_linear_closed_form():
    cst, s, sigma = 0.8, 0.3, 1.2
    got = gaussian_closed_form(Polynomial(1, {(1,): cst}), [s], sigma, 0.01)
    ref = math.sqrt(2 * 0.01 * sigma / math.sqrt(math.pi)) * math.exp(-(sigma**2) * (cst - s) ** 2 / 2)
    assert got == pytest.approx(ref, rel=1e-13)


def test_sinc_probability_tail_and_sign():
    c0 = CircuitSpec(1, Polynomial.zero(1), 1e-3, 1.0)
    assert exact_probability_sinc_1d(c0, 9.0) < 1e-10
    for seed in range(10):
        c = CircuitSpec(1, random_polynomial(1, 3, 1.0, seed=seed), 1e-3, 1.0)
        assert exact_probability_sinc_1d(c, 0.2) >= 0.0


def test_oscillation_scale_shrinks_under_rescaling():
    p = random_polynomial(2, 3, 1.0, seed=2)
    assert oscillation_scale(p.rescale(2.0)) < oscillation_scale(p)


def test_ideal_tail_is_flagged_heuristic():
    est = riemann_amplitude(Polynomial(1, {(3,): 1.0}), [0.0], GridSpec(3.0, 8))
    assert est.eps_a_heuristic and math.isfinite(est.eps_a)
    assert est.mc_stderr == 0 and est.eps_c == 0
