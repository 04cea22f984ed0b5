"""Amplitude backends for CV-IQP integrals.

Ideal amplitude (infinite squeezing)::

    A_f(s) = (2 pi)^-n  int exp(i f(q) - i s.q) dq^n

Finite squeezing ``sigma`` and homodyne precision ``delta_p``::

    A~_f(s) = (delta_p / (pi^1.5 sigma))^(n/2)  int exp(i f(q) - i s.q) exp(-|q|^2 / (2 sigma^2)) dq^n

Grid backends sum over the left-endpoint lattice of a :class:`~cviqp.circuit.GridSpec`.
All reductions use fixed chunk shapes and a fixed pairwise tree of partials, so
results do not depend on ``threads``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._reduce import complex_sum, map_chunks, pairwise_sum, split_leading
from .circuit import TWO_PI, CircuitSpec, GridSpec, PhaseFunction, TabulatedPhase
from .exceptions import BudgetExceededError, NumericalCheckError
from .polynomial import Polynomial, growth_coefficients

#: default cap on the number of integration-grid points
DEFAULT_GRID_BUDGET = 1 << 24

METHODS = ("riemann", "binned", "squeezed_grid", "squeezed_mc", "gaussian_closed", "sinc_exact")


@dataclass(frozen=True)
class AmplitudeEstimate:
    """Complex amplitude with its error budget.

    ``eps_a`` bounds the truncation to ``D_L`` (a heuristic when
    ``eps_a_heuristic`` is set), ``eps_b`` is the Richardson estimate of the
    discretisation error (``nan`` when not requested), ``eps_c`` bounds the
    phase binning and ``mc_stderr`` is the Monte Carlo standard error.
    """

    value: complex
    method: str
    eps_a: float = 0.0
    eps_b: float = math.nan
    eps_c: float = 0.0
    mc_stderr: float = 0.0
    eps_a_heuristic: bool = False

    @property
    def probability(self) -> float:
        return abs(self.value) ** 2

    def to_json(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "method": self.method,
            "eps_a": self.eps_a,
            "eps_b": self.eps_b,
            "eps_c": self.eps_c,
            "mc_stderr": self.mc_stderr,
            "eps_a_heuristic": self.eps_a_heuristic,
        }


@dataclass(frozen=True)
class PhaseBinReport:
    """Bin counts ``Omega_b`` of ``f_s(q) mod 2 pi`` over ``N = 2**l`` bins ``[phi_b, phi_{b+1})``."""

    N: int
    counts: np.ndarray = field(repr=False)

    @property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.N) / self.N

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> dict:
        return {"N": self.N, "angles": self.angles.tolist(), "counts": self.counts.tolist()}


# ---------------------------------------------------------------------------
# chunked tensor-grid evaluation
# ---------------------------------------------------------------------------


class _ChunkedGrid:
    """Tensor lattice ``nodes^n`` split into chunks along its leading axes."""

    def __init__(self, grid: GridSpec, n: int):
        self.grid = grid
        self.n = n
        self.nodes = grid.nodes()
        self.N1 = grid.nodes_per_mode
        self.lead, self.n_chunks = split_leading(self.N1, n)
        self.rest = n - self.lead
        self.rest_shape = (self.N1,) * self.rest

    def lead_coords(self, i: int) -> np.ndarray:
        if not self.lead:
            return np.empty(0)
        idx = np.unravel_index(i, (self.N1,) * self.lead)
        return self.nodes[np.array(idx)]

    def rest_product(self, vec: np.ndarray) -> np.ndarray:
        """Outer product of a per-mode vector over the non-leading axes."""
        out = np.ones(self.rest_shape)
        for a in range(self.rest):
            shape = [1] * self.rest
            shape[a] = self.N1
            out = out * vec.reshape(shape)
        return out


class _PolyOnGrid:
    """Evaluates a polynomial chunk by chunk.

    Terms are grouped by the set of non-leading axes they touch; each group is
    assembled on its own sub-lattice and folded into a covering group, so a
    chunk costs one full-size operation per maximal group instead of per term.
    """

    def __init__(self, p: Polynomial, cg: _ChunkedGrid):
        self.cg = cg
        self.terms = list(p.terms.items())
        deg = max(p.degree, 1)
        self.powers = [cg.nodes**e for e in range(deg + 1)]

    def chunk(self, i: int) -> np.ndarray:
        cg = self.cg
        lead_q = cg.lead_coords(i)
        rest_coeff: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms:
            coeff = c
            for qk, e in zip(lead_q, exp[: cg.lead]):
                if e:
                    coeff *= float(qk) ** e
            key = exp[cg.lead :]
            rest_coeff[key] = rest_coeff.get(key, 0.0) + coeff

        groups: dict[tuple[int, ...], np.ndarray] = {}
        const = 0.0
        for rexp, coeff in rest_coeff.items():
            axes = tuple(a for a, e in enumerate(rexp) if e)
            if not axes:
                const += coeff
                continue
            arr = None
            for a in axes:
                v = self.powers[rexp[a]]
                arr = v if arr is None else np.multiply.outer(arr, v)
            arr = coeff * arr
            groups[axes] = groups[axes] + arr if axes in groups else arr

        # fold each group into a materialised superset where possible
        order = sorted(groups, key=len, reverse=True)
        kept: dict[tuple[int, ...], np.ndarray] = {}
        for axes in order:
            host = next((h for h in kept if set(axes) <= set(h)), None)
            if host is None:
                kept[axes] = groups[axes]
            else:
                shape = [cg.N1 if a in axes else 1 for a in host]
                kept[host] = kept[host] + groups[axes].reshape(shape)

        out = None
        for axes, arr in kept.items():
            shape = [cg.N1 if a in axes else 1 for a in range(cg.rest)]
            piece = arr.reshape(shape)
            out = piece if out is None else out + piece
        if out is None:
            out = np.zeros(cg.rest_shape)
        else:
            out = np.broadcast_to(out, cg.rest_shape)
        return out + const if const else np.array(out)


def _phase_evaluator(f: PhaseFunction, s: np.ndarray, cg: _ChunkedGrid):
    """Return ``chunk(i) -> f_s`` on chunk ``i`` (shape ``cg.rest_shape``)."""
    if isinstance(f, Polynomial):
        return _PolyOnGrid(f.subtract_linear(s), cg).chunk
    if f.m != cg.grid.k * cg.n:
        raise ValueError(
            f"tabulated phase has m={f.m} bits but the grid has k*n={cg.grid.k * cg.n}"
        )
    table = f.values.reshape((cg.n_chunks,) + cg.rest_shape)
    if not np.any(s):
        return lambda i: table[i]
    lin = _PolyOnGrid(Polynomial.linear(-s), cg).chunk
    return lambda i: table[i] + lin(i)


def _check_inputs(f: PhaseFunction, s: Sequence[float], n: int | None = None) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if n is None:
        if isinstance(f, Polynomial):
            n = f.n_vars
        else:
            n = s.size
    if s.shape != (n,):
        raise ValueError(f"outcome s must have length {n}, got shape {s.shape}")
    if isinstance(f, Polynomial) and f.n_vars != n:
        raise ValueError("phase polynomial and outcome dimension disagree")
    return s


def _check_budget(what: str, points: int, budget: int | None) -> None:
    budget = DEFAULT_GRID_BUDGET if budget is None else int(budget)
    if points > budget:
        raise BudgetExceededError(what, points, budget)


def _weighted_sum(phase_at, cg: _ChunkedGrid, weight_1d: np.ndarray | None, threads: int) -> complex:
    rest_w = cg.rest_product(weight_1d) if weight_1d is not None else None

    def work(i: int) -> complex:
        ph = phase_at(i)
        re = np.cos(ph)
        im = np.sin(ph)
        if rest_w is None:
            return complex(float(np.sum(re)), float(np.sum(im)))
        scale = 1.0
        if cg.lead:
            scale = float(np.prod(weight_1d[np.array(np.unravel_index(i, (cg.N1,) * cg.lead))]))
        re *= rest_w
        im *= rest_w
        return scale * complex(float(np.sum(re)), float(np.sum(im)))

    return pairwise_sum(map_chunks(work, cg.n_chunks, threads))


def gaussian_weight(nodes: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-(nodes**2) / (2.0 * sigma**2))


def squeezing_prefactor(n: int, sigma: float, delta_p: float) -> float:
    """``(delta_p / (pi^1.5 sigma))^(n/2)``."""
    return (delta_p / (math.pi**1.5 * sigma)) ** (n / 2.0)


# ---------------------------------------------------------------------------
# ideal amplitude
# ---------------------------------------------------------------------------


def _ideal_sum(f, s, g, n, budget, threads) -> complex:
    _check_budget("integration grid", g.n_points(n), budget)
    cg = _ChunkedGrid(g, n)
    total = _weighted_sum(_phase_evaluator(f, s, cg), cg, None, threads)
    return (g.delta_q / TWO_PI) ** n * total


def _ideal_tail_heuristic(f: PhaseFunction, s: np.ndarray, g: GridSpec, n: int) -> tuple[float, bool]:
    """Integration-by-parts estimate of the contribution from outside ``D_L``."""
    if isinstance(f, TabulatedPhase):
        return 0.0, False
    a = growth_coefficients(f.subtract_linear(s))
    if f.degree < 2:
        return math.inf, True
    slope = sum(a[d] * g.L ** (d - 1) for d in range(1, a.size))
    surface = 2 * n * (2 * g.L) ** (n - 1)
    return surface / ((TWO_PI**n) * slope), True


def riemann_amplitude(
    f: PhaseFunction,
    s: Sequence[float],
    g: GridSpec,
    *,
    n_modes: int | None = None,
    budget: int | None = None,
    richardson: bool = False,
    threads: int = 1,
) -> AmplitudeEstimate:
    """Ideal amplitude as a left-endpoint Riemann sum over the grid.

    Args:
        f: phase polynomial or tabulated phase
        s: outcome vector
        g: integration grid
        n_modes: number of modes (inferred from ``f`` or ``s`` when omitted)
        budget: maximum number of grid points (default :data:`DEFAULT_GRID_BUDGET`)
        richardson: also sum on the grid with half the spacing to estimate ``eps_b``
        threads: worker threads; does not change the result

    Returns:
        AmplitudeEstimate: ``(dq / 2 pi)^n * sum_q exp(i f_s(q))``
    """
    s = _check_inputs(f, s, n_modes)
    n = s.size
    value = _ideal_sum(f, s, g, n, budget, threads)
    eps_a, heuristic = _ideal_tail_heuristic(f, s, g, n)
    eps_b = math.nan
    if richardson and isinstance(f, Polynomial):
        finer = _ideal_sum(f, s, g.refined(), n, budget, threads)
        eps_b = 2.0 * abs(value - finer)
    return AmplitudeEstimate(value, "riemann", eps_a=eps_a, eps_b=eps_b, eps_a_heuristic=heuristic)


def binned_amplitude(
    f: PhaseFunction,
    s: Sequence[float],
    g: GridSpec,
    l: int,
    *,
    n_modes: int | None = None,
    budget: int | None = None,
    threads: int = 1,
) -> tuple[AmplitudeEstimate, PhaseBinReport]:
    """Ideal amplitude with ``exp(i f_s)`` replaced by ``N = 2**l`` step phases.

    Each grid point's reduced phase ``f_s(q) mod 2 pi`` falls into exactly one
    half-open bin ``[2 pi b / N, 2 pi (b+1) / N)`` and contributes
    ``exp(2 pi i b / N)``.
    """
    if int(l) != l or l < 1:
        raise ValueError("number of bins must be N = 2**l with l >= 1")
    N = 1 << int(l)
    s = _check_inputs(f, s, n_modes)
    n = s.size
    _check_budget("integration grid", g.n_points(n), budget)
    cg = _ChunkedGrid(g, n)
    phase_at = _phase_evaluator(f, s, cg)
    width = TWO_PI / N

    def work(i: int) -> np.ndarray:
        theta = np.mod(phase_at(i), TWO_PI).ravel()
        theta[theta >= TWO_PI] = 0.0
        b = np.minimum((theta / width).astype(np.int64), N - 1)
        # guard the division against rounding across a bin edge
        b -= (b * width > theta).astype(np.int64)
        b += ((b + 1) * width <= theta).astype(np.int64)
        return np.bincount(b, minlength=N).astype(np.int64)

    counts = pairwise_sum(map_chunks(work, cg.n_chunks, threads))
    if int(counts.sum()) != g.n_points(n):
        raise NumericalCheckError("phase-bin counts do not add up to the number of grid points")
    report = PhaseBinReport(N, counts)
    phases = np.exp(1j * report.angles)
    total = pairwise_sum([complex(c) * z for c, z in zip(counts, phases)])
    value = (g.delta_q / TWO_PI) ** n * total
    eps_a, heuristic = _ideal_tail_heuristic(f, s, g, n)
    eps_c = (2 * g.L / TWO_PI) ** n * width
    est = AmplitudeEstimate(value, "binned", eps_a=eps_a, eps_c=eps_c, eps_a_heuristic=heuristic)
    return est, report


# ---------------------------------------------------------------------------
# finite squeezing
# ---------------------------------------------------------------------------


def _gaussian_mass_outside(L: float, sigma: float, n: int) -> float:
    inside = math.erf(L / (math.sqrt(2.0) * sigma)) ** n
    return (math.sqrt(TWO_PI) * sigma) ** n * (1.0 - inside)


def _squeezed_sum(f, s, g, n, sigma, budget, threads) -> complex:
    _check_budget("integration grid", g.n_points(n), budget)
    cg = _ChunkedGrid(g, n)
    w = gaussian_weight(cg.nodes, sigma)
    return g.delta_q**n * _weighted_sum(_phase_evaluator(f, s, cg), cg, w, threads)


def _require_squeezed(c: CircuitSpec) -> None:
    if not c.is_squeezed:
        raise ValueError("sigma is infinite: use riemann_amplitude for the ideal amplitude")


def squeezed_amplitude_grid(
    c: CircuitSpec,
    s: Sequence[float],
    g: GridSpec,
    *,
    budget: int | None = None,
    richardson: bool = False,
    threads: int = 1,
) -> AmplitudeEstimate:
    """Finite-squeezing amplitude by lattice quadrature over ``D_L``."""
    _require_squeezed(c)
    s = _check_inputs(c.phase, s, c.n_modes)
    n = c.n_modes
    pref = squeezing_prefactor(n, c.sigma, c.delta_p)
    value = pref * _squeezed_sum(c.phase, s, g, n, c.sigma, budget, threads)
    eps_a = pref * _gaussian_mass_outside(g.L, c.sigma, n)
    eps_b = math.nan
    if richardson and isinstance(c.phase, Polynomial):
        finer = pref * _squeezed_sum(c.phase, s, g.refined(), n, c.sigma, budget, threads)
        eps_b = 2.0 * abs(value - finer)
    return AmplitudeEstimate(value, "squeezed_grid", eps_a=eps_a, eps_b=eps_b)


def squeezed_amplitude_mc(
    c: CircuitSpec,
    s: Sequence[float],
    samples: int,
    seed: int,
    *,
    threads: int = 1,
) -> AmplitudeEstimate:
    """Finite-squeezing amplitude by Monte Carlo with the Gaussian as sampling density.

    Draws ``q ~ N(0, sigma^2 I)`` so that the integral is
    ``(sqrt(2 pi) sigma)^n E[exp(i f_s(q))]``.
    """
    _require_squeezed(c)
    if int(samples) != samples or samples < 100:
        raise ValueError("Monte Carlo needs at least 100 samples")
    if seed is None:
        raise ValueError("a seed is required for Monte Carlo")
    poly = c.polynomial
    s = _check_inputs(poly, s, c.n_modes)
    n = c.n_modes
    fs = poly.subtract_linear(s)
    rng = np.random.default_rng(seed)
    q = rng.normal(0.0, c.sigma, size=(int(samples), n))

    chunk = 1 << 16
    n_chunks = -(-q.shape[0] // chunk)
    parts = map_chunks(lambda i: fs.evaluate_many(q[i * chunk : (i + 1) * chunk]), n_chunks, threads)
    phase = np.concatenate(parts)
    re = np.cos(phase)
    im = np.sin(phase)
    scale = squeezing_prefactor(n, c.sigma, c.delta_p) * (math.sqrt(TWO_PI) * c.sigma) ** n
    mean = complex(float(np.mean(re)), float(np.mean(im)))
    var = float(np.var(re, ddof=1)) + float(np.var(im, ddof=1))
    stderr = scale * math.sqrt(var / q.shape[0])
    return AmplitudeEstimate(scale * mean, "squeezed_mc", eps_a=0.0, eps_b=0.0, mc_stderr=stderr)


def gaussian_closed_form(
    p: Polynomial, s: Sequence[float], sigma: float, delta_p: float
) -> complex:
    """Exact finite-squeezing amplitude for a phase of degree at most two.

    Writes ``f(q) - s.q - |q|^2/(2 sigma^2) = c0 - q^T A q / 2 + beta.q`` with
    ``A = I / sigma^2 - 2 i M`` and ``beta = i (b - s)``, then uses
    ``int exp(-q^T A q / 2 + beta.q) = (2 pi)^(n/2) det(A)^(-1/2) exp(beta^T A^-1 beta / 2)``.
    Since ``M`` is real symmetric, ``A`` is diagonalised by the same orthogonal
    matrix and ``det(A)^(-1/2)`` is the product of principal roots of its
    eigenvalues ``1/sigma^2 - 2 i lambda_j``; each has positive real part, so
    this is the branch continuously connected to ``M = 0``.
    """
    if p.degree > 2:
        raise ValueError(f"degree > 2: closed form needs a quadratic phase (got degree {p.degree})")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError("closed form needs a finite positive sigma")
    if not delta_p > 0:
        raise ValueError("delta_p must be positive")
    n = p.n_vars
    s = _check_inputs(p, s, n)
    c0, b, M = p.quadratic_form()
    lam, Q = np.linalg.eigh(M)
    eig = 1.0 / sigma**2 - 2j * lam
    if np.any(np.abs(eig) < 1e-300):
        raise ValueError("singular quadratic form")
    t = Q.T @ (b - s)
    # beta^T A^-1 beta / 2 with beta = i t (in the eigenbasis)
    expo = -0.5 * np.sum(t**2 / eig)
    det_root = np.prod(1.0 / np.sqrt(eig))
    integral = np.exp(1j * c0) * (TWO_PI ** (n / 2.0)) * det_root * np.exp(expo)
    return complex(squeezing_prefactor(n, sigma, delta_p) * integral)


def exact_probability_sinc_1d(
    c: CircuitSpec,
    s: float,
    g: GridSpec | None = None,
    *,
    budget: int = 1 << 14,
) -> float:
    """Single-mode outcome probability with the finite-precision sinc kernel kept.

    Evaluates ``(dp / (pi N)) int int u(q) conj(u(q')) sinc(dp (q - q')) dq dq'``
    with ``u(q) = exp(i f(q) - i s q - q^2 / (2 sigma^2))`` and ``N = sqrt(pi) sigma``
    on a 2-D lattice, using the Toeplitz structure of the kernel.
    """
    if c.n_modes != 1:
        raise ValueError("the exact sinc-kernel probability is single-mode only")
    _require_squeezed(c)
    if g is None:
        from .circuit import default_grid

        g = default_grid(c, 1e-8)
    _check_budget("sinc-kernel grid", g.nodes_per_mode, budget)
    q = g.nodes()
    s = float(s)
    if isinstance(c.phase, Polynomial):
        fq = c.phase.evaluate_many(q[:, None])
    else:
        if c.phase.m != g.k:
            raise ValueError("tabulated phase does not match the grid")
        fq = c.phase.values
    u = np.exp(1j * (fq - s * q)) * gaussian_weight(q, c.sigma)
    corr = np.correlate(u, u, mode="full")  # corr[d + M - 1] = sum_j u[j + d] conj(u[j])
    lags = np.arange(-(q.size - 1), q.size) * g.delta_q
    kernel = np.sinc(c.delta_p * lags / math.pi)
    total = complex_sum(kernel * corr) * g.delta_q**2
    norm = math.sqrt(math.pi) * c.sigma
    prob = c.delta_p / (math.pi * norm) * total
    if abs(prob.imag) >= 1e-10:
        raise NumericalCheckError(f"sinc-kernel probability has imaginary part {prob.imag:.3g}")
    return float(prob.real)


def oscillation_scale(p: Polynomial) -> float:
    """Radius beyond which the phase gradient bound exceeds ``2 pi``.

    Solves ``sum_d a_d r^(d-1) = 2 pi`` where ``a_d`` is ``d`` times the summed
    coefficient magnitudes of the degree-``d`` terms. Rescaling ``q -> T q``
    with ``T > 1`` shrinks the result.
    """
    if p.degree < 2:
        raise ValueError("oscillation scale needs a polynomial of degree >= 2")
    a = growth_coefficients(p)
    coeffs = a[1:].copy()  # coeffs[j] multiplies r**j
    coeffs[0] -= TWO_PI
    if coeffs[0] >= 0:
        return 0.0
    roots = np.roots(coeffs[::-1])
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots))].real
    r = float(real[real > 0].max())
    # polish: the growth function is increasing on r > 0
    for _ in range(3):
        val = sum(coeffs[j] * r**j for j in range(coeffs.size))
        der = sum(j * coeffs[j] * r ** (j - 1) for j in range(1, coeffs.size))
        r -= val / der
    return r



def contour_axis(L: float, resolution: int) -> np.ndarray:
    """Plot lattice ``L (2 j - R) / R``, ``j = 0..R-1``; contains the origin for even ``R``."""
    if int(resolution) != resolution or resolution < 2:
        raise ValueError("resolution must be an integer >= 2")
    if not L > 0:
        raise ValueError("L must be positive")
    R = int(resolution)
    return L * (2.0 * np.arange(R) - R) / R


def integrand_real_part(p: Polynomial, sigma: float, axis: np.ndarray) -> np.ndarray:
    """``Re[exp(i f(q)) exp(-|q|^2 / (2 sigma^2))]`` on ``axis x axis``; ``out[i2, i1]`` is at ``(q1, q2) = (axis[i1], axis[i2])``."""
    if p.n_vars != 2:
        raise ValueError("contour plots need a two-mode phase")
    if not sigma > 0:
        raise ValueError("sigma must be positive (or inf)")
    q1, q2 = np.meshgrid(axis, axis, indexing="xy")
    pts = np.stack([q1.ravel(), q2.ravel()], axis=1)
    out = np.cos(p.evaluate_many(pts)).reshape(q1.shape)
    if math.isfinite(sigma):
        out = out * np.exp(-(q1**2 + q2**2) / (2.0 * sigma**2))
    return out
