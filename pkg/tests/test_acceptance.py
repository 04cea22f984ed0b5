"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the summary) or
``python tests/test_acceptance.py`` (lines printed as each criterion finishes).
"""
import math
import struct
import time

import numpy as np
import pytest

from cviqp import cli
from cviqp.circuit import CircuitSpec, GridSpec, OutcomeGrid, default_grid
from cviqp.hardness import (
    BooleanOracle,
    FoolingInstance,
    anticoncentration_report,
    fooling_demo,
    fooling_node_bound,
    hiding_check,
    markov_check,
    verify_sharp_p_sum,
)
from cviqp.integrator import (
    binned_amplitude,
    exact_probability_sinc_1d,
    gaussian_closed_form,
    riemann_amplitude,
    squeezed_amplitude_grid,
    squeezed_amplitude_mc,
)
from cviqp.polynomial import figure2_polynomial, random_polynomial
from cviqp.sampler import distribution, perturb

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # executed as a script
    ACCEPTANCE_LINES = []


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_gaussian_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    cases = 0
    for n in (1, 2, 3):
        for sigma in (0.5, 1.0, 2.0):
            for seed in range(20):
                p = random_polynomial(n, 2, 0.5, seed=seed, gate_set=False)
                s = np.random.default_rng(1000 + seed).uniform(-0.5, 0.5, n)
                c = CircuitSpec(n, p, 0.01, sigma)
                got = squeezed_amplitude_grid(c, s, default_grid(c, 1e-8)).value
                ref = gaussian_closed_form(p, s, sigma, 0.01)
                worst = max(worst, abs(got - ref) / abs(ref))
                cases += 1
    elapsed = time.perf_counter() - t0
    verdict(
        1,
        "Gaussian oracle agreement",
        worst <= 1e-4 and elapsed <= 120,
        f"{cases} cases, max rel err {worst:.2e} <= 1e-4, {elapsed:.1f}s <= 120s",
    )


def test_criterion_02_normalization():
    t0 = time.perf_counter()
    masses = []
    # coefficients in [-0.25, 0.25]: larger cubic terms push momentum past the
    # lattice edge L and the captured mass drops below 0.98 (see decisions log)
    for n, k in ((1, 12), (2, 8)):
        for seed in range(10):
            c = CircuitSpec(n, random_polynomial(n, 3, 0.25, seed=seed), 0.05, 1.0)
            L = default_grid(c, 1e-6).L
            masses.append(distribution(c, GridSpec(L, k)).total_mass)
    elapsed = time.perf_counter() - t0
    lo, hi = min(masses), max(masses)
    # informational, not gated: the same seeds with coefficients in [-1, 1]
    wide = []
    for n, k in ((1, 12), (2, 8)):
        for seed in range(10):
            c = CircuitSpec(n, random_polynomial(n, 3, 1.0, seed=seed), 0.05, 1.0)
            wide.append(distribution(c, GridSpec(default_grid(c, 1e-6).L, k)).total_mass)
    verdict(
        2,
        "normalization",
        0.98 <= lo and hi <= 1.002 and elapsed <= 300,
        f"total_mass in [{lo:.6f}, {hi:.6f}] vs [0.98, 1.002], {elapsed:.1f}s; "
        f"ungated coeff range 1.0 gives [{min(wide):.4f}, {max(wide):.4f}]",
    )


def test_criterion_03_hiding():
    worst_amp = 0.0
    worst_dist = 0.0
    bitwise = 0
    rng = np.random.default_rng(3)
    for trial in range(10):
        c = CircuitSpec(2, random_polynomial(2, 3, 0.25, seed=100 + trial), 0.05, 1.0)
        g = GridSpec(5.0, 8)
        lattice = OutcomeGrid(g.L, c.delta_p)
        r = 2 * c.delta_p * rng.integers(-10, 11, size=2)
        s = lattice.values()[rng.integers(0, lattice.ell, size=2)]
        rep = hiding_check(c, r, s, g)
        worst_amp = max(worst_amp, rep.gap)
        worst_dist = max(worst_dist, rep.distribution_max_rel_gap)
        bitwise += rep.distribution_max_abs_gap == 0.0
    # label-shift equality is an exact identity; numerically the two sides
    # round differently ((a - r) - s vs a - (s + r)), so it is checked to
    # rounding level relative to the largest probability
    verdict(
        3,
        "hiding identity",
        worst_amp < 1e-12 and worst_dist <= 1e-13,
        f"amp gap {worst_amp:.1e} < 1e-12; label-shift gap/peak {worst_dist:.1e} <= 1e-13"
        f" (bitwise in {bitwise}/10)",
    )


def test_criterion_04_phase_bins():
    g = GridSpec(2.0, 6)
    bound_ok = True
    ratios = []
    for seed in range(10):
        p = random_polynomial(2, 3, 1.0, seed=200 + seed)
        exact = riemann_amplitude(p, [0.0, 0.0], g).value
        errs = []
        for l in range(3, 9):
            est, _ = binned_amplitude(p, [0.0, 0.0], g, l)
            err = abs(est.value - exact)
            bound = (2 * g.L) ** 2 / (2 * math.pi) ** 2 * 2 * math.pi / 2**l
            bound_ok &= err <= bound and est.eps_c == pytest.approx(bound)
            errs.append(err)
        ratios.extend(a / b for a, b in zip(errs, errs[1:]))
    mean_ratio = float(np.mean(ratios))
    verdict(
        4,
        "phase-bin convergence",
        bound_ok and 1.6 <= mean_ratio <= 2.4,
        f"bound held: {bound_ok}; mean consecutive ratio {mean_ratio:.3f} in [1.6, 2.4]",
    )


def test_criterion_05_sharp_p():
    rng = np.random.default_rng(5)
    worst = 0.0
    runs = 0
    g = GridSpec(math.pi, 6)  # m = 12 = k * n with n = 2
    for N in (2, 4, 8):
        l = N.bit_length() - 1
        for _ in range(10):
            oracles = [BooleanOracle.random(12 - l, rng) for _ in range(N)]
            worst = max(worst, verify_sharp_p_sum(oracles, g).abs_gap)
            runs += 1
    verdict(5, "#P-sum reconstruction", worst < 1e-12, f"{runs} oracle sets, max abs_gap {worst:.1e} < 1e-12")


def test_criterion_06_fooling():
    inst = FoolingInstance.random(2, 16, 4.0, 0.2, seed=6)
    rep = fooling_demo(inst, 1.0, GridSpec(4.0, 9))
    same = struct.pack("<d", rep.rule_plus) == struct.pack("<d", rep.rule_minus)
    bound = fooling_node_bound(2, 1.0, 0.5, 0.0, 0.0)
    verdict(
        6,
        "fooling construction",
        same and rep.integral > 0 and abs(bound - 1.4715) <= 1e-3,
        f"rule outputs bitwise equal: {same}; I = {rep.integral:.4f} > 0; bound {bound:.5f}",
    )


def test_criterion_07_sinc_regime():
    worst = 0.0
    rng = np.random.default_rng(7)
    for seed in range(5):
        c = CircuitSpec(1, random_polynomial(1, 3, 1.0, seed=300 + seed), 1e-3, 1.0)
        g = default_grid(c, 1e-8)
        s = float(rng.uniform(-1, 1))
        exact = exact_probability_sinc_1d(c, s, g)
        approx = squeezed_amplitude_grid(c, [s], g).probability
        worst = max(worst, abs(exact - approx) / approx)
    verdict(7, "sinc-regime validation", worst <= 1e-3, f"max rel gap {worst:.2e} <= 1e-3")


def test_criterion_08_monte_carlo():
    c = CircuitSpec(3, random_polynomial(3, 3, 0.5, seed=8), 0.01, 1.0)
    s = np.zeros(3)
    grid = squeezed_amplitude_grid(c, s, default_grid(c, 1e-8)).value
    hits = 0
    for seed in range(20):
        est = squeezed_amplitude_mc(c, s, 10**6, seed=seed)
        hits += abs(est.value - grid) <= 4 * est.mc_stderr
    verdict(8, "Monte Carlo consistency", hits >= 19, f"{hits}/20 runs within 4 stderr (need 19)")


def test_criterion_09_anticoncentration():
    c = CircuitSpec(2, random_polynomial(2, 3, 0.25, seed=9), 0.05, 1.0)
    g = default_grid(c, 1e-6)
    rep = anticoncentration_report(c, g, 0.5, OutcomeGrid(g.L, c.delta_p).n_outcomes(2), seed=9)
    identity = abs(rep.mean_times_outcomes - rep.total_mass) <= 1e-9
    pz = rep.fraction_above_alpha_mean >= rep.paley_zygmund_floor - 1e-12
    exact = distribution(c, g, normalize=True)
    mk = markov_check(exact, perturb(exact, 1 / 64, seed=9), 1 / 64, 1 / 8)
    verdict(
        9,
        "anti-concentration bookkeeping",
        rep.exhaustive and identity and pz and mk.fraction <= 1 / 8,
        f"|E*l^n - mass| = {abs(rep.mean_times_outcomes - rep.total_mass):.1e}; "
        f"fraction {rep.fraction_above_alpha_mean:.4f} >= floor {rep.paley_zygmund_floor:.4f}; "
        f"Markov fraction {mk.fraction:.4f} <= 0.125",
    )


def test_criterion_10_figure(tmp_path):
    circuit = tmp_path / "fig2.json"
    circuit.write_text(
        cli._io.dumps({"n": 2, "delta_p": 0.01, "sigma": "inf", "phase": figure2_polynomial().to_json()})
    )
    t0 = time.perf_counter()
    code = cli.run(
        ["contour", "--circuit", str(circuit), "--sigma", "inf,3,1.5,1", "-R", "400", "--L", "4",
         "--output-dir", str(tmp_path), "--output", str(tmp_path / "index.json")],
        env={},
    )
    elapsed = time.perf_counter() - t0
    ok = code == 0 and elapsed <= 30
    origin_ok = True
    tail = 0.0
    for label in ("inf", "3", "1.5", "1"):
        rows = (tmp_path / f"contour_sigma_{label}.csv").read_text().splitlines()
        q1 = np.array([float(x) for x in rows[0].split(",")[1:]])
        body = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        q2, vals = body[:, 0], body[:, 1:]
        ok &= vals.shape == (400, 400)
        origin_ok &= vals[np.flatnonzero(q2 == 0.0)[0], np.flatnonzero(q1 == 0.0)[0]] == 1.0
        if label == "1":
            radius = np.hypot(*np.meshgrid(q1, q2, indexing="xy"))
            tail = float(np.abs(vals[radius > 3.0]).max())
    verdict(
        10,
        "figure reproduction",
        ok and origin_ok and tail <= math.exp(-4.5) + 1e-12,
        f"4 CSVs 400x400 in {elapsed:.1f}s <= 30s; origin = 1.0: {origin_ok}; "
        f"sigma=1 tail max {tail:.2e} <= {math.exp(-4.5):.2e}",
    )


if __name__ == "__main__":
    import inspect
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted(inspect.getmembers(sys.modules[__name__], inspect.isfunction)):
        if not name.startswith("test_criterion"):
            continue
        try:
            if "tmp_path" in inspect.signature(fn).parameters:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
