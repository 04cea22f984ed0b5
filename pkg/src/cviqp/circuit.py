"""CV-IQP circuit description and the integration / outcome lattices.

A circuit is ``n_modes`` momentum-squeezed inputs (position width ``sigma``,
``inf`` for ideal momentum eigenstates), a diagonal phase ``f(q)`` and momentum
homodyne detection with precision ``delta_p``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .polynomial import Gate, Polynomial, from_gates

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

#: sigma * delta_p above this leaves the regime where the sinc kernel is dropped
VALIDITY_THRESHOLD = 0.01


class TabulatedPhase:
    """Phase given point-wise on the ``2**m`` strings of an integration grid.

    ``values[x]`` is the phase of the grid point whose m-bit label is the
    integer ``x`` (most significant bit first, mode-major).
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float]):
        vals = np.array(values, dtype=float)
        if vals.ndim != 1 or vals.size == 0 or vals.size & (vals.size - 1):
            raise ValueError("a tabulated phase needs exactly 2**m values")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0) or np.any(vals >= TWO_PI):
            raise ValueError("tabulated phases must lie in [0, 2*pi)")
        vals.setflags(write=False)
        self._values = vals

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def m(self) -> int:
        return self._values.size.bit_length() - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TabulatedPhase):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __repr__(self) -> str:
        return f"TabulatedPhase(m={self.m})"

    def to_json(self) -> dict:
        return {"table": self._values.tolist()}


PhaseFunction = Union[Polynomial, TabulatedPhase]


def phase_from_json(data: Mapping, n: int) -> PhaseFunction:
    if "table" in data:
        return TabulatedPhase(data["table"])
    poly = Polynomial.from_json(data)
    if poly.n_vars != n:
        raise ValueError(f"phase polynomial has {poly.n_vars} variables, circuit has {n} modes")
    return poly


@dataclass(frozen=True)
class CircuitSpec:
    """Physical parameters of a CV-IQP instance.

    Args:
        n_modes (int): number of qumodes
        phase (Polynomial or TabulatedPhase): diagonal phase ``f``
        sigma (float): squeezing width; ``math.inf`` selects the ideal amplitude
        delta_p (float): homodyne precision (half-width of the momentum window)
    """

    n_modes: int
    phase: PhaseFunction
    delta_p: float
    sigma: float = math.inf

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError("n_modes must be a positive integer")
        if not self.delta_p > 0 or not math.isfinite(self.delta_p):
            raise ValueError("delta_p must be a positive finite number")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive (or inf)")
        if isinstance(self.phase, Polynomial):
            if self.phase.n_vars != self.n_modes:
                raise ValueError("phase polynomial and circuit disagree on the number of modes")
        elif isinstance(self.phase, TabulatedPhase):
            if self.phase.m % self.n_modes:
                raise ValueError("table size 2**m needs m divisible by n_modes")
        else:
            raise TypeError(f"unsupported phase type {type(self.phase).__name__}")
        if self.is_squeezed and self.sigma * self.delta_p >= 1:
            raise ValueError("finite squeezing requires sigma * delta_p < 1")
        if self.outside_validity_regime:
            log.info(
                "sigma * delta_p = %.3g exceeds %.3g; the sinc-free amplitude is only approximate",
                self.sigma * self.delta_p,
                VALIDITY_THRESHOLD,
            )

    @property
    def is_squeezed(self) -> bool:
        return math.isfinite(self.sigma)

    @property
    def outside_validity_regime(self) -> bool:
        return self.is_squeezed and self.sigma * self.delta_p > VALIDITY_THRESHOLD

    @property
    def polynomial(self) -> Polynomial:
        if not isinstance(self.phase, Polynomial):
            raise ValueError("this operation needs a polynomial phase, not a tabulated one")
        return self.phase

    def displace(self, r: Sequence[float]) -> "CircuitSpec":
        return displace(self, r)

    def to_json(self) -> dict:
        return {
            "n": self.n_modes,
            "sigma": self.sigma if self.is_squeezed else "inf",
            "delta_p": self.delta_p,
            "phase": self.phase.to_json(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "CircuitSpec":
        try:
            n = int(data["n"])
            delta_p = float(data["delta_p"])
            sigma_raw = data.get("sigma", "inf")
        except (KeyError, TypeError) as err:
            raise ValueError(f"malformed circuit JSON: {err}") from err
        sigma = math.inf if str(sigma_raw).lower() in ("inf", "infinity") else float(sigma_raw)
        phase: PhaseFunction = (
            phase_from_json(data["phase"], n) if "phase" in data else Polynomial.zero(n)
        )
        if data.get("gates"):
            if not isinstance(phase, Polynomial):
                raise ValueError("gates cannot be combined with a tabulated phase")
            phase = phase + from_gates(n, [Gate.from_json(g) for g in data["gates"]])
        return cls(n, phase, delta_p, sigma)


def displace(c: CircuitSpec, r: Sequence[float]) -> CircuitSpec:
    """Append displacement gates ``prod_k exp(-i q_k r_k)``: the phase becomes ``f - r.q``."""
    if not isinstance(c.phase, Polynomial):
        raise ValueError("displacement is undefined for a tabulated phase")
    return replace(c, phase=c.phase.subtract_linear(r))


@dataclass(frozen=True)
class GridSpec:
    """Left-endpoint integration lattice on ``[-L, L)^n`` with ``2**k`` nodes per mode.

    Grid points map to m-bit strings (``m = k * n``): mode 0 supplies the most
    significant ``k`` bits and each mode's node index ``j`` is written in plain
    (offset) binary, so node ``-L + j * delta_q`` has label ``j``.
    """

    L: float
    k: int

    def __post_init__(self):
        if not self.L > 0 or not math.isfinite(self.L):
            raise ValueError("grid half-width L must be positive and finite")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("bits per mode k must be a positive integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def nodes_per_mode(self) -> int:
        return 1 << self.k

    @property
    def delta_q(self) -> float:
        return 2.0 * self.L / self.nodes_per_mode

    def nodes(self) -> np.ndarray:
        j = np.arange(self.nodes_per_mode, dtype=float)
        return -self.L + j * self.delta_q

    def m(self, n_modes: int) -> int:
        return self.k * n_modes

    def n_points(self, n_modes: int) -> int:
        return 1 << self.m(n_modes)

    def encode(self, index: Sequence[int]) -> str:
        """Per-mode node indices -> m-bit string."""
        if any(not 0 <= j < self.nodes_per_mode for j in index):
            raise ValueError("node index out of range")
        return "".join(format(int(j), f"0{self.k}b") for j in index)

    def decode(self, bits: str) -> tuple[int, ...]:
        """m-bit string -> per-mode node indices."""
        if len(bits) % self.k or set(bits) - {"0", "1"}:
            raise ValueError(f"not a valid {self.k}-bit-per-mode string: {bits!r}")
        return tuple(int(bits[i : i + self.k], 2) for i in range(0, len(bits), self.k))

    def point(self, bits: str) -> np.ndarray:
        return np.array([-self.L + j * self.delta_q for j in self.decode(bits)])

    def refined(self) -> "GridSpec":
        """Same hypercube, half the spacing."""
        return GridSpec(self.L, self.k + 1)


@dataclass(frozen=True)
class OutcomeGrid:
    """Homodyne outcome lattice ``{-L, -L + 2 dp, ..., L - 2 dp}`` per mode (``ell = L / dp`` values)."""

    L: float
    delta_p: float
    ell: int = field(init=False)

    def __post_init__(self):
        if not self.L > 0 or not self.delta_p > 0:
            raise ValueError("L and delta_p must be positive")
        ratio = self.L / self.delta_p
        ell = round(ratio)
        if ell < 1 or abs(ratio - ell) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"L / delta_p = {ratio!r} must be a positive integer")
        object.__setattr__(self, "ell", int(ell))

    def values(self) -> np.ndarray:
        j = np.arange(self.ell, dtype=float)
        return (2.0 * j - self.ell) * self.delta_p

    def n_outcomes(self, n_modes: int) -> int:
        return self.ell**n_modes

    def index_of(self, s: float) -> int:
        """Lattice index of an outcome value (must lie on the lattice)."""
        j = (s / self.delta_p + self.ell) / 2.0
        jr = round(j)
        if abs(j - jr) > 1e-6 or not 0 <= jr < self.ell:
            raise ValueError(f"{s!r} is not on the outcome lattice")
        return int(jr)


def default_grid(c: CircuitSpec, target_truncation: float = 1e-6) -> GridSpec:
    """Heuristic integration grid for a circuit.

    The half-width is ``scale * sqrt(2 ln(1/target_truncation))`` with ``scale``
    the squeezing width (finite ``sigma``) or the oscillation scale (ideal case),
    rounded up to a multiple of ``delta_p``. The spacing satisfies
    ``delta_q <= min(sigma, L_osc) / 8``.
    """
    from .integrator import oscillation_scale

    if not 0 < target_truncation < 1:
        raise ValueError("target_truncation must lie in (0, 1)")
    l_osc = None
    if isinstance(c.phase, Polynomial) and c.phase.degree >= 2:
        l_osc = oscillation_scale(c.phase)
        if l_osc <= 0:
            l_osc = None
    if c.is_squeezed:
        scale = c.sigma
    elif l_osc is not None:
        scale = l_osc
    else:
        raise ValueError(
            "ideal circuit without superlinear phase: no decay and no oscillation scale; "
            "supply L (and k) explicitly"
        )
    L0 = scale * math.sqrt(2.0 * math.log(1.0 / target_truncation))
    ell = max(1, math.ceil(L0 / c.delta_p - 1e-9))
    L = ell * c.delta_p
    if isinstance(c.phase, TabulatedPhase):
        return GridSpec(L, c.phase.m // c.n_modes)
    dq_max = min(x for x in (c.sigma, l_osc) if x is not None) / 8.0
    k = max(1, math.ceil(math.log2(2.0 * L / dq_max) - 1e-12))
    return GridSpec(L, k)
