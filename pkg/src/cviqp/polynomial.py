"""Sparse multivariate real polynomials and the diagonal gates that build them.

A :class:`Polynomial` is an immutable map from exponent vectors (one
non-negative integer per variable) to non-zero real coefficients. Diagonal
CV-IQP gates contribute monomials of degree at most three:

* ``Z(k, z)``          ->  ``z * q_k``
* ``CZ(j, k, c)``      ->  ``c * q_j * q_k``
* ``CubicPhase(k, v)`` ->  ``v * q_k**3``
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

#: coefficients below this magnitude are dropped after arithmetic
ZERO_TOL = 1e-15

Exponent = tuple[int, ...]


class Polynomial:
    """Real polynomial in ``n_vars`` variables stored in canonical sparse form.

    Args:
        n_vars (int): number of variables
        terms (Mapping[tuple[int, ...], float]): exponent vector -> coefficient.
            Duplicate keys cannot occur; coefficients with magnitude below
            :data:`ZERO_TOL` are discarded.
    """

    __slots__ = ("_n", "_terms")

    def __init__(self, n_vars: int, terms: Mapping[Sequence[int], float] | None = None):
        if int(n_vars) != n_vars or n_vars < 1:
            raise ValueError(f"n_vars must be a positive integer, got {n_vars!r}")
        self._n = int(n_vars)
        canon: dict[Exponent, float] = {}
        for exp, coeff in (terms or {}).items():
            key = _check_exponent(exp, self._n)
            canon[key] = canon.get(key, 0.0) + float(coeff)
        self._terms = {e: c for e, c in sorted(canon.items()) if abs(c) >= ZERO_TOL}

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def terms(self) -> Mapping[Exponent, float]:
        return MappingProxyType(self._terms)

    @classmethod
    def zero(cls, n_vars: int) -> "Polynomial":
        return cls(n_vars, {})

    @classmethod
    def linear(cls, coeffs: Sequence[float]) -> "Polynomial":
        """The linear form ``sum_k coeffs[k] * q_k``."""
        n = len(coeffs)
        return cls(n, {_unit(n, k): c for k, c in enumerate(coeffs)})

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self._n, tuple(self._terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial({self._n}, {self._terms!r})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for exp, c in self._terms.items():
            mono = "*".join(
                f"q{k + 1}" if e == 1 else f"q{k + 1}^{e}" for k, e in enumerate(exp) if e
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        return max((sum(e) for e in self._terms), default=0)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_same(other)
        merged = dict(self._terms)
        for e, c in other._terms.items():
            merged[e] = merged.get(e, 0.0) + c
        return Polynomial(self._n, merged)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self._n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(self._n, {e: factor * c for e, c in self._terms.items()})

    def evaluate(self, q: Sequence[float]) -> float:
        """Value of the polynomial at a single point ``q``."""
        q = np.asarray(q, dtype=float)
        if q.shape != (self._n,):
            raise ValueError(f"expected a point of length {self._n}, got shape {q.shape}")
        total = 0.0
        for exp, c in self._terms.items():
            mono = c
            for qk, e in zip(q, exp):
                if e:
                    mono *= float(qk) ** e
            total += mono
        return total

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation on an ``(N, n_vars)`` array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self._n:
            raise ValueError(f"expected points of shape (N, {self._n}), got {points.shape}")
        out = np.zeros(points.shape[0])
        for exp, c in self._terms.items():
            mono = np.full(points.shape[0], c)
            for k, e in enumerate(exp):
                if e:
                    mono *= points[:, k] ** e
            out += mono
        return out

    def linear_coefficients(self) -> np.ndarray:
        return np.array([self._terms.get(_unit(self._n, k), 0.0) for k in range(self._n)])

    def subtract_linear(self, s: Sequence[float]) -> "Polynomial":
        """Return ``f_s(q) = f(q) - s . q``."""
        s = np.asarray(s, dtype=float)
        if s.shape != (self._n,):
            raise ValueError(f"expected a shift of length {self._n}, got shape {s.shape}")
        merged = dict(self._terms)
        for k, sk in enumerate(s):
            if sk != 0.0:
                key = _unit(self._n, k)
                merged[key] = merged.get(key, 0.0) - float(sk)
        return Polynomial(self._n, merged)

    def rescale(self, T: float) -> "Polynomial":
        """Return ``p'`` with ``p'(q) = p(T q)``; degree-d coefficients gain ``T**d``."""
        if not T > 0:
            raise ValueError(f"rescale factor must be positive, got {T!r}")
        return Polynomial(self._n, {e: c * T ** sum(e) for e, c in self._terms.items()})

    def quadratic_form(self) -> tuple[float, np.ndarray, np.ndarray]:
        """Split a degree <= 2 polynomial as ``c0 + b.q + q^T M q`` with symmetric ``M``."""
        if self.degree > 2:
            raise ValueError(f"degree > 2 (got degree {self.degree})")
        c0 = 0.0
        b = np.zeros(self._n)
        M = np.zeros((self._n, self._n))
        for exp, c in self._terms.items():
            idx = [k for k, e in enumerate(exp) for _ in range(e)]
            if not idx:
                c0 += c
            elif len(idx) == 1:
                b[idx[0]] += c
            elif idx[0] == idx[1]:
                M[idx[0], idx[0]] += c
            else:
                M[idx[0], idx[1]] += c / 2
                M[idx[1], idx[0]] += c / 2
        return c0, b, M

    def to_json(self) -> dict:
        return {
            "n": self._n,
            "terms": [{"exp": list(e), "coeff": c} for e, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Polynomial":
        try:
            n = data["n"]
            terms: dict[Exponent, float] = {}
            for t in data["terms"]:
                key = tuple(t["exp"])
                if key in terms:
                    raise ValueError(f"duplicate exponent vector {list(key)}")
                terms[key] = float(t["coeff"])
        except (KeyError, TypeError) as err:
            raise ValueError(f"malformed polynomial JSON: {err}") from err
        return cls(n, terms)

    def _check_same(self, other: "Polynomial") -> None:
        if not isinstance(other, Polynomial) or other._n != self._n:
            raise ValueError("polynomials must have the same number of variables")


def _check_exponent(exp: Sequence[int], n: int) -> Exponent:
    key = tuple(int(e) for e in exp)
    if len(key) != n or any(e < 0 for e in key) or any(int(a) != a for a in exp):
        raise ValueError(f"invalid exponent vector {list(exp)} for {n} variables")
    return key


def _unit(n: int, k: int, power: int = 1) -> Exponent:
    e = [0] * n
    e[k] = power
    return tuple(e)


@dataclass(frozen=True)
class Gate:
    """A diagonal gate: ``kind`` is ``"Z"``, ``"CZ"`` or ``"V"`` (cubic phase)."""

    kind: str
    modes: tuple[int, ...]
    strength: float

    def __post_init__(self):
        arity = {"Z": 1, "CZ": 2, "V": 1}
        if self.kind not in arity:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        object.__setattr__(self, "strength", float(self.strength))
        if len(self.modes) != arity[self.kind]:
            raise ValueError(f"{self.kind} gate acts on {arity[self.kind]} mode(s)")
        if any(m < 0 for m in self.modes):
            raise ValueError("mode indices must be non-negative")
        if self.kind == "CZ" and self.modes[0] == self.modes[1]:
            raise ValueError("CZ gate needs two distinct modes")

    def monomial(self, n: int) -> Exponent:
        if max(self.modes) >= n:
            raise ValueError(f"gate {self} addresses a mode >= {n}")
        if self.kind == "Z":
            return _unit(n, self.modes[0])
        if self.kind == "V":
            return _unit(n, self.modes[0], 3)
        e = [0] * n
        e[self.modes[0]] += 1
        e[self.modes[1]] += 1
        return tuple(e)

    def to_json(self) -> dict:
        return {"kind": self.kind, "modes": list(self.modes), "strength": self.strength}

    @classmethod
    def from_json(cls, data: Mapping) -> "Gate":
        try:
            return cls(data["kind"], tuple(data["modes"]), data["strength"])
        except (KeyError, TypeError) as err:
            raise ValueError(f"malformed gate JSON: {err}") from err


def Z(mode: int, strength: float) -> Gate:
    return Gate("Z", (mode,), strength)


def CZ(mode_a: int, mode_b: int, strength: float) -> Gate:
    return Gate("CZ", (mode_a, mode_b), strength)


def CubicPhase(mode: int, strength: float) -> Gate:
    return Gate("V", (mode,), strength)


def from_gates(n: int, gates: Iterable[Gate]) -> Polynomial:
    """Accumulate the phase polynomial of a sequence of diagonal gates.

    Diagonal gates commute, so the order of ``gates`` does not matter.
    """
    terms: dict[Exponent, float] = {}
    for g in gates:
        key = g.monomial(n)
        terms[key] = terms.get(key, 0.0) + g.strength
    return Polynomial(n, terms)


def gate_monomials(n: int, max_degree: int = 3) -> list[Exponent]:
    """Monomials realisable by Z, CZ and cubic-phase gates, up to ``max_degree``."""
    monos = [_unit(n, k) for k in range(n)]
    if max_degree >= 2:
        for j, k in itertools.combinations(range(n), 2):
            e = [0] * n
            e[j] = e[k] = 1
            monos.append(tuple(e))
    if max_degree >= 3:
        monos.extend(_unit(n, k, 3) for k in range(n))
    return monos


def all_monomials(n: int, max_degree: int) -> list[Exponent]:
    """Every monomial of total degree ``1..max_degree`` in ``n`` variables."""
    return [
        e for e in itertools.product(range(max_degree + 1), repeat=n) if 1 <= sum(e) <= max_degree
    ]


def random_polynomial(
    n: int,
    max_degree: int,
    coeff_range: float = 1.0,
    seed: int = 0,
    gate_set: bool = True,
) -> Polynomial:
    """Draw every admissible monomial's coefficient uniformly in ``[-coeff_range, coeff_range]``.

    With ``gate_set=True`` only gate-realisable monomials are used; otherwise all
    monomials of degree ``1..max_degree``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not coeff_range > 0:
        raise ValueError("coeff_range must be positive")
    monos = gate_monomials(n, max_degree) if gate_set else all_monomials(n, max_degree)
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-coeff_range, coeff_range, size=len(monos))
    return Polynomial(n, dict(zip(monos, coeffs)))


def random_degree3(n: int, coeff_range: float = 1.0, seed: int = 0) -> Polynomial:
    """Random phase polynomial of a circuit built from Z, CZ and cubic-phase gates."""
    return random_polynomial(n, 3, coeff_range, seed, gate_set=True)


def figure2_polynomial() -> Polynomial:
    """Cubic two-mode polynomial used in the contour-plot figure."""
    return Polynomial(
        2,
        {
            (1, 0): 1.0,
            (0, 1): -1.0,
            (1, 1): 1.0,
            (2, 0): 1.0,
            (0, 2): -1.0,
            (1, 2): -1.0,
            (2, 1): -1.0,
            (3, 0): 1.0,
            (0, 3): 1.0,
        },
    )


def figure3_polynomial(T: float = 1.0) -> Polynomial:
    """Rescaling-figure polynomial; ``T`` multiplies each degree-d coefficient by ``T**d``."""
    base = Polynomial(
        2,
        {
            (1, 0): -1.0,
            (0, 1): -1.0,
            (1, 1): 1.0,
            (2, 0): -1.0,
            (0, 2): 1.0,
            (1, 2): 1.0,
            (2, 1): -1.0,
            (3, 0): 1.0,
            (0, 3): 1.0,
        },
    )
    return base if T == 1 else base.rescale(T)


def growth_coefficients(p: Polynomial) -> np.ndarray:
    """``a[d] = d * sum of |coeff|`` over degree-d terms (index by degree)."""
    a = np.zeros(p.degree + 1)
    for e, c in p.terms.items():
        d = sum(e)
        a[d] += d * abs(c)
    return a
