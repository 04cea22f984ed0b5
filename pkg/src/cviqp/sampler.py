"""Outcome distributions on the homodyne lattice and sampling from them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._reduce import map_chunks, pairwise_sum
from .circuit import CircuitSpec, GridSpec, OutcomeGrid
from .integrator import (
    _ChunkedGrid,
    _check_budget,
    _phase_evaluator,
    gaussian_weight,
    squeezing_prefactor,
)

log = logging.getLogger(__name__)

#: default cap on the number of lattice outcomes
DEFAULT_OUTCOME_BUDGET = 1 << 20


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over the ``ell^n`` outcome lattice, indexed ``probs[j_1, ..., j_n]``.

    ``total_mass`` is the sum before any normalisation; it is itself a
    convergence diagnostic (projector completeness).
    """

    lattice: OutcomeGrid
    n_modes: int
    probs: np.ndarray = field(repr=False)
    total_mass: float
    normalized: bool = False

    def __post_init__(self):
        shape = (self.lattice.ell,) * self.n_modes
        if self.probs.shape != shape:
            raise ValueError(f"probability array must have shape {shape}")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        self.probs.setflags(write=False)

    @property
    def n_outcomes(self) -> int:
        return self.probs.size

    def outcomes(self) -> np.ndarray:
        """All outcome vectors in lattice-lexicographic order, shape ``(ell^n, n)``."""
        vals = self.lattice.values()
        grids = np.meshgrid(*([vals] * self.n_modes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def prob(self, s: Sequence[float]) -> float:
        idx = tuple(self.lattice.index_of(x) for x in s)
        return float(self.probs[idx])

    def normalize(self) -> "OutcomeDistribution":
        mass = _mass(self.probs)
        if mass <= 0:
            raise ValueError("cannot normalise a distribution with zero mass")
        log.info("normalising outcome distribution (total mass %.12g)", mass)
        return replace(self, probs=self.probs / mass, normalized=True)

    def to_csv(self) -> str:
        header = ",".join(f"s_{k + 1}" for k in range(self.n_modes)) + ",probability"
        rows = [header]
        for s, p in zip(self.outcomes(), np.ravel(self.probs)):
            rows.append(",".join(format(float(x), ".17g") for x in (*s, p)))
        return "\n".join(rows) + "\n"


def _mass(probs: np.ndarray) -> float:
    flat = np.ravel(probs)
    chunk = 1 << 12
    return float(pairwise_sum([float(np.sum(flat[i : i + chunk])) for i in range(0, flat.size, chunk)]))


def _contract_axis(arr: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    """``out[..., j, ...] = sum_i arr[..., i, ...] mat[j, i]`` along ``axis`` (no BLAS)."""
    moved = np.moveaxis(arr, axis, -1)
    out = np.einsum("...i,ji->...j", moved, mat, optimize=False)
    return np.moveaxis(out, -1, axis)


def amplitude_field(
    c: CircuitSpec, g: GridSpec, *, budget: int | None = None, threads: int = 1
) -> np.ndarray:
    """``exp(i f(q)) exp(-|q|^2 / (2 sigma^2))`` on every grid point, shape ``(2^k,)*n``."""
    n = c.n_modes
    _check_budget("integration grid", g.n_points(n), budget)
    cg = _ChunkedGrid(g, n)
    phase_at = _phase_evaluator(c.phase, np.zeros(n), cg)
    w = gaussian_weight(cg.nodes, c.sigma)
    rest_w = cg.rest_product(w)

    def work(i: int) -> np.ndarray:
        ph = phase_at(i)
        scale = 1.0
        if cg.lead:
            scale = float(np.prod(w[np.array(np.unravel_index(i, (cg.N1,) * cg.lead))]))
        return (np.cos(ph) + 1j * np.sin(ph)) * (rest_w * scale)

    parts = map_chunks(work, cg.n_chunks, threads)
    return np.stack(parts).reshape((cg.N1,) * n)


def distribution(
    c: CircuitSpec,
    g: GridSpec,
    *,
    normalize: bool = False,
    budget: int | None = None,
    outcome_budget: int | None = None,
    threads: int = 1,
) -> OutcomeDistribution:
    """Squared finite-squeezing amplitudes at every lattice outcome.

    The outcome lattice has half-width ``g.L`` and spacing ``2 * delta_p``. The
    grid sum separates per mode, so it is contracted one axis at a time with
    the matrix ``exp(-i s_j q_i)``.
    """
    if not c.is_squeezed:
        raise ValueError("distribution needs finite squeezing")
    lattice = OutcomeGrid(g.L, c.delta_p)
    n = c.n_modes
    ob = DEFAULT_OUTCOME_BUDGET if outcome_budget is None else outcome_budget
    _check_budget("outcome lattice", lattice.n_outcomes(n), ob)
    field_ = amplitude_field(c, g, budget=budget, threads=threads)
    svals = lattice.values()
    mat = np.exp(-1j * np.multiply.outer(svals, g.nodes()))
    amp = field_
    for axis in range(n):
        amp = _contract_axis(amp, mat, axis)
    scale = squeezing_prefactor(n, c.sigma, c.delta_p) * g.delta_q**n
    probs = np.abs(scale * amp) ** 2
    d = OutcomeDistribution(lattice, n, probs, _mass(probs))
    return d.normalize() if normalize else d


def sample(d: OutcomeDistribution, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` outcomes by inverse CDF over the lattice; shape ``(count, n)``."""
    if not d.normalized:
        raise ValueError("sample() needs a normalised distribution")
    if int(count) != count or count < 1:
        raise ValueError("count must be a positive integer")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(np.ravel(d.probs))
    u = rng.random(int(count)) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return d.outcomes()[idx]


def perturb(d: OutcomeDistribution, eps: float, seed: int) -> OutcomeDistribution:
    """A distribution at l1 distance ``eps`` from ``d``.

    Moves ``eps / 2`` of probability out of a random subset of outcomes
    (proportionally) and into the complement, so mass is conserved.
    """
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    if not d.normalized:
        raise ValueError("perturb() needs a normalised distribution")
    flat = np.array(np.ravel(d.probs), dtype=float)
    if eps == 0:
        return replace(d, probs=flat.reshape(d.probs.shape))
    if flat.size < 2:
        raise ValueError("need at least two outcomes to move probability")
    half = eps / 2.0
    rng = np.random.default_rng(seed)
    order = rng.permutation(flat.size)
    acc = np.cumsum(flat[order])
    cut = int(np.searchsorted(acc, half, side="left")) + 1
    if cut >= flat.size:
        subset = order[-1:]
    else:
        subset = order[:cut]
    mask = np.zeros(flat.size, dtype=bool)
    mask[subset] = True
    donor_mass = flat[mask].sum()
    flat[mask] *= 1.0 - half / donor_mass
    rest_mass = flat[~mask].sum()
    if rest_mass > 0:
        flat[~mask] += half * flat[~mask] / rest_mass
    else:
        flat[~mask] += half / (~mask).sum()
    flat = np.maximum(flat, 0.0)
    flat /= flat.sum()
    return replace(d, probs=flat.reshape(d.probs.shape), total_mass=1.0, normalized=True)


def l1_distance(a: OutcomeDistribution, b: OutcomeDistribution) -> float:
    check_same_lattice(a, b)
    return float(np.abs(np.ravel(a.probs) - np.ravel(b.probs)).sum())


def check_same_lattice(a: OutcomeDistribution, b: OutcomeDistribution) -> None:
    if a.lattice != b.lattice or a.n_modes != b.n_modes:
        raise ValueError("distributions live on different outcome lattices")


def shift_indices(lattice: OutcomeGrid, r: Sequence[float]) -> tuple[int, ...]:
    """Lattice offsets of a commensurate shift ``r = 2 delta_p * d``."""
    out = []
    for x in r:
        d = x / (2.0 * lattice.delta_p)
        dr = round(d)
        if abs(d - dr) > 1e-9 * max(1.0, abs(d)):
            raise ValueError(f"shift {x!r} is not a multiple of 2 * delta_p")
        out.append(int(dr))
    return tuple(out)


def is_commensurate(lattice: OutcomeGrid, r: Sequence[float]) -> bool:
    try:
        shift_indices(lattice, r)
    except ValueError:
        return False
    return True


def gaussian_outcome_profile(s: np.ndarray, sigma: float, delta_p: float) -> np.ndarray:
    """Closed-form ``|A~(s)|^2`` per mode for the zero phase."""
    return 2.0 * delta_p * sigma / math.sqrt(math.pi) * np.exp(-(sigma**2) * s**2)
