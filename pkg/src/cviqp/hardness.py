"""Hardness constructions for CV-IQP integrals as runnable experiments.

* weighted #P sums: a tabulated phase built from Boolean oracles whose Riemann
  sum is a phase-weighted sum of the oracles' popcounts;
* bounded-function embedding: ``f_s = arccos(phi / c)`` makes the real part of
  the amplitude the grid integral of ``phi / c``;
* fooling functions that vanish on every node of a deterministic rule;
* hiding (displacement re-indexing), Markov and Paley-Zygmund bookkeeping.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._reduce import map_chunks, pairwise_sum
from .circuit import TWO_PI, CircuitSpec, GridSpec, OutcomeGrid, TabulatedPhase, displace
from .exceptions import NumericalCheckError
from .integrator import (
    _ChunkedGrid,
    _check_budget,
    gaussian_weight,
    riemann_amplitude,
    squeezed_amplitude_grid,
)
from .sampler import (
    OutcomeDistribution,
    _mass,
    check_same_lattice,
    distribution,
    l1_distance,
    shift_indices,
)

#: largest oracle/string length handled by brute-force enumeration
MAX_ENUMERATION_BITS = 20


class _Report:
    def to_json(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, complex):
                out[k] = {"re": v.real, "im": v.imag}
            elif isinstance(v, np.ndarray):
                out[k] = v.tolist()
            else:
                out[k] = v
        return out


# ---------------------------------------------------------------------------
# weighted #P sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BooleanOracle:
    """Truth table of ``Phi: {0,1}^arity -> {0,1}``; ``table[y]`` for integer label ``y``."""

    arity: int
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.uint8)
        if int(self.arity) != self.arity or self.arity < 0:
            raise ValueError("arity must be a non-negative integer")
        if t.shape != (1 << self.arity,):
            raise ValueError(f"truth table must have exactly 2**{self.arity} entries")
        if np.any(t > 1):
            raise ValueError("truth table entries must be 0 or 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def popcount(self) -> int:
        return int(self.table.sum())

    @classmethod
    def random(cls, arity: int, rng: np.random.Generator, density: float = 0.5) -> "BooleanOracle":
        return cls(arity, (rng.random(1 << arity) < density).astype(np.uint8))

    @classmethod
    def constant(cls, arity: int, value: int) -> "BooleanOracle":
        return cls(arity, np.full(1 << arity, value, dtype=np.uint8))

    def to_json(self) -> dict:
        return {"arity": self.arity, "table": self.table.tolist()}

    @classmethod
    def from_json(cls, data) -> "BooleanOracle":
        if isinstance(data, Mapping):
            table = list(data["table"])
            arity = int(data.get("arity", max(len(table).bit_length() - 1, 0)))
        else:
            table = list(data)
            arity = max(len(table).bit_length() - 1, 0)
        return cls(arity, np.array(table))


def oracles_from_json(data) -> list[BooleanOracle]:
    items = data["oracles"] if isinstance(data, Mapping) else data
    return [BooleanOracle.from_json(o) for o in items]


def _oracle_geometry(oracles: Sequence[BooleanOracle], g: GridSpec) -> tuple[int, int, int]:
    """Return ``(l, m, n_modes)`` for an oracle list on a grid."""
    N = len(oracles)
    if N < 2 or N & (N - 1):
        raise ValueError("need N = 2**l >= 2 oracles")
    arity = oracles[0].arity
    if any(o.arity != arity for o in oracles):
        raise ValueError("all oracles must share the same arity")
    l = N.bit_length() - 1
    m = arity + l
    if m % g.k:
        raise ValueError(f"m = arity + l = {m} is not a multiple of k = {g.k}")
    return l, m, m // g.k


def build_sharp_p_phase(oracles: Sequence[BooleanOracle], g: GridSpec) -> TabulatedPhase:
    """Phase ``f(b, y) = 2 pi (b + 1/2) / N`` if ``Phi_b(y) = 1`` else ``0``.

    The leading ``l`` bits of a string ``x = (b, y)`` select the oracle.
    """
    l, m, _ = _oracle_geometry(oracles, g)
    if m > MAX_ENUMERATION_BITS:
        raise ValueError(f"m = {m} exceeds the enumeration limit {MAX_ENUMERATION_BITS}")
    N = len(oracles)
    rows = [
        np.where(o.table == 1, TWO_PI * (b + 0.5) / N, 0.0) for b, o in enumerate(oracles)
    ]
    return TabulatedPhase(np.concatenate(rows))


@dataclass(frozen=True)
class SharpPReport(_Report):
    reconstructed: complex
    direct: complex
    abs_gap: float
    binned: complex
    popcounts: list
    bin_counts: list
    n_modes: int
    m: int


def verify_sharp_p_sum(
    oracles: Sequence[BooleanOracle], g: GridSpec, s: Sequence[float] | None = None
) -> SharpPReport:
    """Compare the popcount-weighted sum with brute-force summation over all ``2**m`` strings.

    ``reconstructed = (dq/2pi)^n [sum_b exp(2 pi i (b+1/2)/N) |Phi_b| + #zeros]``;
    strings where the oracle is 0 carry phase 0 and contribute 1 each.
    ``binned`` is the step-phase value ``sum_b exp(i phi_b) Omega_b`` of the same table.
    """
    l, m, n = _oracle_geometry(oracles, g)
    if s is not None and np.any(np.asarray(s, dtype=float)):
        raise ValueError("the #P bookkeeping is exact only at s = 0")
    phase = build_sharp_p_phase(oracles, g)
    N = len(oracles)
    direct = riemann_amplitude(phase, np.zeros(n), g, n_modes=n).value
    pops = [o.popcount for o in oracles]
    zeros = (1 << m) - sum(pops)
    scale = (g.delta_q / TWO_PI) ** n
    mid = [complex(p) * complex(np.exp(1j * TWO_PI * (b + 0.5) / N)) for b, p in enumerate(pops)]
    reconstructed = scale * pairwise_sum(mid + [complex(zeros)])
    omega = list(pops)
    omega[0] += zeros
    edge = [complex(w) * complex(np.exp(1j * TWO_PI * b / N)) for b, w in enumerate(omega)]
    binned = scale * pairwise_sum(edge)
    return SharpPReport(
        reconstructed=complex(reconstructed),
        direct=complex(direct),
        abs_gap=abs(reconstructed - direct),
        binned=complex(binned),
        popcounts=pops,
        bin_counts=omega,
        n_modes=n,
        m=m,
    )


# ---------------------------------------------------------------------------
# bounded functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArccosEmbedding:
    phase: TabulatedPhase
    clamped: int
    n_modes: int


def grid_points(g: GridSpec, n: int) -> np.ndarray:
    """All lattice points in m-bit label order, shape ``(2**m, n)``."""
    nodes = g.nodes()
    mesh = np.meshgrid(*([nodes] * n), indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1)


def arccos_embed(
    phi: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    c: float,
    g: GridSpec,
    n: int,
) -> ArccosEmbedding:
    """Tabulate ``arccos(phi(q) / c)`` on the grid.

    ``phi`` is either a vectorised callable on ``(N, n)`` points or its values in
    label order. Ratios that round slightly outside ``[-1, 1]`` are clamped and
    counted.
    """
    if not c > 0:
        raise ValueError("bound c must be positive")
    if callable(phi):
        values = np.asarray(phi(grid_points(g, n)), dtype=float)
    else:
        values = np.asarray(phi, dtype=float)
    if values.shape != (g.n_points(n),):
        raise ValueError("phi must supply one value per grid point")
    ratio = values / c
    outside = np.abs(ratio) > 1
    table = np.arccos(np.clip(ratio, -1.0, 1.0))
    return ArccosEmbedding(TabulatedPhase(table), int(outside.sum()), n)


# ---------------------------------------------------------------------------
# fooling functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoolingInstance:
    """Rule nodes ``theta_i`` (rows of ``nodes``) and the exclusion radius parameter ``delta``.

    The excluded region is the union of balls of radius ``delta * sqrt(n)``
    around the nodes.
    """

    nodes: np.ndarray = field(repr=False)
    delta: float
    n: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.n)
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def radius(self) -> float:
        return self.delta * math.sqrt(self.n)

    @classmethod
    def random(cls, n: int, n_nodes: int, L: float, delta: float, seed: int) -> "FoolingInstance":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-L, L, size=(n_nodes, n)), delta, n)


def fooling_eval(inst: FoolingInstance, q: np.ndarray) -> np.ndarray | float:
    """``min(1, dist(q, Gamma) / (sqrt(n) delta))``; ``q`` may be one point or ``(M, n)``."""
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    pts = q.reshape(-1, inst.n) if single else q
    if pts.shape[1] != inst.n:
        raise ValueError(f"points must have {inst.n} coordinates")
    if inst.n_nodes == 0:
        out = np.ones(pts.shape[0])
    else:
        diff = pts[:, None, :] - inst.nodes[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).min(axis=1)
        out = np.minimum(1.0, np.maximum(0.0, dist - inst.radius) / inst.radius)
    return float(out[0]) if single else out


def node_rule(values: np.ndarray, L: float, n: int) -> float:
    """Equal-weight rule on ``D_L`` that only reads the integrand at the nodes."""
    if values.size == 0:
        return 0.0
    w = (2.0 * L) ** n / values.size
    return 0.0 + w * pairwise_sum([float(v) for v in values])


@dataclass(frozen=True)
class FoolingReport(_Report):
    n: int
    n_nodes: int
    delta: float
    sigma: float
    rule_plus: float
    rule_minus: float
    rule_outputs_identical: bool
    integral: float
    error_lower_bound: float
    gaussian_mass: float
    volume_bound: float
    node_bound: float


def fooling_demo(
    inst: FoolingInstance, sigma: float, g: GridSpec, *, budget: int | None = None, threads: int = 1
) -> FoolingReport:
    """Run a node rule on ``+phi g`` and ``-phi g`` and measure ``I = int_{D_L} phi g``.

    Both rule outputs coincide because ``phi`` vanishes on the nodes, so the
    rule's error on one of them is at least ``I``.
    """
    n = inst.n
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    def weight(pts: np.ndarray) -> np.ndarray:
        return np.exp(-np.sum(pts**2, axis=1) / (2 * sigma**2))

    at_nodes = fooling_eval(inst, inst.nodes) if inst.n_nodes else np.empty(0)
    g_nodes = weight(inst.nodes) if inst.n_nodes else np.empty(0)
    plus = node_rule(at_nodes * g_nodes, g.L, n)
    minus = node_rule(-at_nodes * g_nodes, g.L, n)
    identical = struct.pack("<d", plus) == struct.pack("<d", minus)
    if not identical:
        raise NumericalCheckError("node rule distinguished +phi g from -phi g")

    _check_budget("fooling grid", g.n_points(n), budget)
    cg = _ChunkedGrid(g, n)
    w1 = gaussian_weight(cg.nodes, sigma)
    rest_pts = grid_points(GridSpec(g.L, g.k), cg.rest) if cg.rest else np.empty((1, 0))

    def work(i: int) -> float:
        lead = cg.lead_coords(i)
        pts = np.hstack([np.broadcast_to(lead, (rest_pts.shape[0], cg.lead)), rest_pts])
        return float(np.sum(fooling_eval(inst, pts) * weight(pts)))

    integral = g.delta_q**n * pairwise_sum(map_chunks(work, cg.n_chunks, threads))
    gauss = g.delta_q**n * float(np.sum(w1)) ** n
    volume_bound = (math.sqrt(TWO_PI) * sigma) ** n - inst.n_nodes * (
        inst.delta * math.sqrt(TWO_PI * math.e)
    ) ** n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = fooling_node_bound(n, sigma, inst.delta, 0.0, 0.0)
    return FoolingReport(
        n=n,
        n_nodes=inst.n_nodes,
        delta=inst.delta,
        sigma=sigma,
        rule_plus=plus,
        rule_minus=minus,
        rule_outputs_identical=identical,
        integral=integral,
        error_lower_bound=integral,
        gaussian_mass=gauss,
        volume_bound=volume_bound,
        node_bound=bound,
    )


def fooling_node_bound(n: int, sigma: float, delta: float, eps: float = 0.0, eps_b: float = 0.0) -> float:
    """Lower bound ``(sigma / (delta sqrt(e)))^n - (eps - 2 eps_b)`` on the number of rule nodes."""
    if not delta > 0 or not sigma > 0:
        raise ValueError("sigma and delta must be positive")
    if delta >= sigma / math.sqrt(math.e):
        warnings.warn(
            "delta >= sigma / sqrt(e): the node bound no longer grows exponentially in n",
            RuntimeWarning,
            stacklevel=2,
        )
    return (sigma / (delta * math.sqrt(math.e))) ** n - (eps - 2.0 * eps_b)


# ---------------------------------------------------------------------------
# hiding, anti-concentration, Markov
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HidingReport(_Report):
    r: list
    s: list
    ideal_displaced: complex
    ideal_shifted: complex
    ideal_gap: float
    squeezed_displaced: complex | None
    squeezed_shifted: complex | None
    squeezed_gap: float | None
    distribution_max_abs_gap: float | None
    distribution_max_rel_gap: float | None
    gap: float


def hiding_check(
    c: CircuitSpec, r: Sequence[float], s: Sequence[float], g: GridSpec, *, threads: int = 1
) -> HidingReport:
    """Check that displacing by ``r`` and measuring ``s`` equals measuring ``s + r``.

    Compared at the amplitude level (ideal Riemann sum, and the squeezed sum for
    finite ``sigma``) and, when ``r`` is a multiple of ``2 delta_p``, on the
    whole outcome distribution via a lattice re-indexing.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    moved = displace(c, r)
    a1 = riemann_amplitude(moved.phase, s, g, threads=threads).value
    a2 = riemann_amplitude(c.phase, s + r, g, threads=threads).value
    gaps = [abs(a1 - a2)]
    sq1 = sq2 = sq_gap = None
    d_abs = d_rel = None
    if c.is_squeezed:
        sq1 = squeezed_amplitude_grid(moved, s, g, threads=threads).value
        sq2 = squeezed_amplitude_grid(c, s + r, g, threads=threads).value
        sq_gap = abs(sq1 - sq2)
        gaps.append(sq_gap)
        lattice = OutcomeGrid(g.L, c.delta_p)
        try:
            offsets = shift_indices(lattice, r)
        except ValueError:
            offsets = None
        if offsets is not None and lattice.n_outcomes(c.n_modes) <= 1 << 20:
            d_abs, d_rel = _distribution_shift_gap(c, moved, g, offsets, threads)
    return HidingReport(
        r=r.tolist(),
        s=s.tolist(),
        ideal_displaced=a1,
        ideal_shifted=a2,
        ideal_gap=gaps[0],
        squeezed_displaced=sq1,
        squeezed_shifted=sq2,
        squeezed_gap=sq_gap,
        distribution_max_abs_gap=d_abs,
        distribution_max_rel_gap=d_rel,
        gap=max(gaps),
    )


def _distribution_shift_gap(c, moved, g, offsets, threads) -> tuple[float, float]:
    base = distribution(c, g, threads=threads).probs
    shifted = distribution(moved, g, threads=threads).probs
    ell = base.shape[0]
    src, dst = [], []
    for d in offsets:
        if abs(d) >= ell:
            return 0.0, 0.0
        # displaced P(s_j) = P(s_{j + d})
        dst.append(slice(max(0, -d), ell - max(0, d)))
        src.append(slice(max(0, d), ell - max(0, -d)))
    a = shifted[tuple(dst)]
    b = base[tuple(src)]
    diff = np.abs(a - b)
    scale = max(float(base.max()), 1e-300)
    return float(diff.max()), float(diff.max() / scale)


@dataclass(frozen=True)
class AntiConcentrationReport(_Report):
    n: int
    ell: int
    trials: int
    exhaustive: bool
    alpha: float
    total_mass: float
    mean_probability: float
    mean_times_outcomes: float
    second_moment_ratio: float
    fraction_above_alpha_mean: float
    paley_zygmund_floor: float
    fraction_above_alpha_uniform: float
    paley_zygmund_floor_uniform: float
    hiding_max_gap_over_peak: float
    l_condition_factor: float
    l_condition_target: float
    l_condition_consistent_target: float
    l_condition_satisfied: bool


def anticoncentration_report(
    c: CircuitSpec,
    g: GridSpec,
    alpha: float,
    trials: int,
    seed: int,
    *,
    hiding_samples: int = 3,
    threads: int = 1,
) -> AntiConcentrationReport:
    """Moments of ``|A_{f,r}(0)|^2`` over uniformly random lattice displacements ``r``.

    By hiding, ``|A_{f,r}(0)|^2 = P_f(r)``, so the probabilities come from one
    distribution computation; ``hiding_samples`` of them are re-derived from
    the displaced circuit as a cross-check (gap reported relative to the
    largest probability). ``trials >= ell^n`` enumerates every
    shift.

    Paley-Zygmund, ``Pr(X >= a E X) >= (1-a)^2 E[X]^2 / E[X^2]``, holds for the
    empirical measure and is asserted for the threshold ``alpha * mean``; the
    ``*_uniform`` fields use the threshold ``alpha / ell^n`` with the
    correspondingly adjusted floor.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if int(trials) != trials or trials < 1:
        raise ValueError("trials must be a positive integer")
    d = distribution(c, g, threads=threads)
    flat = np.ravel(d.probs)
    total = flat.size
    exhaustive = trials >= total
    rng = np.random.default_rng(seed)
    if exhaustive:
        idx = np.arange(total)
    else:
        idx = rng.integers(0, total, size=int(trials))
    X = flat[idx]
    mean = _mass(X) / X.size
    second = _mass(X * X) / X.size
    ratio = mean**2 / second if second > 0 else math.nan
    frac_mean = float(np.mean(X >= alpha * mean))
    floor = (1 - alpha) ** 2 * ratio
    if frac_mean < floor - 1e-12:
        raise NumericalCheckError("Paley-Zygmund inequality violated on the empirical measure")
    uniform = 1.0 / total
    frac_uniform = float(np.mean(X >= alpha * uniform))
    alpha_eff = alpha * uniform / mean if mean > 0 else math.inf
    floor_uniform = (1 - alpha_eff) ** 2 * ratio if alpha_eff < 1 else 0.0

    outcomes = d.outcomes()
    n_check = min(max(0, int(hiding_samples)), idx.size)
    check_idx = rng.choice(idx, size=n_check, replace=False) if n_check else idx[:0]
    peak = max(float(flat.max()), 1e-300)
    rel = 0.0
    for j in check_idx:
        p_r = squeezed_amplitude_grid(displace(c, outcomes[j]), np.zeros(c.n_modes), g, threads=threads)
        rel = max(rel, abs(p_r.probability - float(flat[j])) / peak)

    L = g.L
    factor = math.sqrt(c.delta_p * L) / math.pi
    return AntiConcentrationReport(
        n=c.n_modes,
        ell=d.lattice.ell,
        trials=int(X.size),
        exhaustive=exhaustive,
        alpha=alpha,
        total_mass=d.total_mass,
        mean_probability=mean,
        mean_times_outcomes=mean * total,
        second_moment_ratio=ratio,
        fraction_above_alpha_mean=frac_mean,
        paley_zygmund_floor=floor,
        fraction_above_alpha_uniform=frac_uniform,
        paley_zygmund_floor_uniform=floor_uniform,
        hiding_max_gap_over_peak=rel,
        l_condition_factor=factor,
        l_condition_target=math.pi / c.delta_p**2,
        l_condition_consistent_target=math.pi**2 / c.delta_p,
        l_condition_satisfied=abs(factor - 1.0) <= 1.0 / c.n_modes,
    )


@dataclass(frozen=True)
class MarkovReport(_Report):
    eps: float
    delta: float
    l1: float
    threshold: float
    fraction: float
    holds: bool


def markov_check(
    exact: OutcomeDistribution, approx: OutcomeDistribution, eps: float, delta: float
) -> MarkovReport:
    """Fraction of outcomes whose error reaches ``eps / (delta ell^n)``; Markov caps it at ``delta``."""
    check_same_lattice(exact, approx)
    if not eps > 0 or not delta > 0:
        raise ValueError("eps and delta must be positive")
    l1 = l1_distance(exact, approx)
    if l1 > eps * (1 + 1e-9) + 1e-12:
        raise ValueError(f"l1 distance {l1:.6g} exceeds eps = {eps:.6g}")
    outcomes = exact.n_outcomes
    threshold = eps / (delta * outcomes)
    err = np.abs(np.ravel(approx.probs) - np.ravel(exact.probs))
    fraction = float(np.mean(err >= threshold))
    holds = fraction <= delta
    if not holds:
        raise NumericalCheckError(f"Markov bound violated: fraction {fraction} > delta {delta}")
    return MarkovReport(eps, delta, l1, threshold, fraction, holds)
