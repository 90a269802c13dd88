"""Limits of the exceedance count ``N_s`` as the threshold ``s`` approaches the upper endpoint.

With ``c = 1 - F_kappa(s)``, ``P(N_s = k) / c -> a_k`` and
``P(N_s = k | N_s > 0) -> p_k = a_k / a_0``.  Everything is expressed through
the table of subset norms ``||sum_{i in T} gamma_i e_i||_D``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Sequence

import numpy as np

from fragility import _kernels
from fragility.dnorm import DNorm, DNormError

EPS_MASS = 1e-9
CLAMP_TOL = 1e-9


class ConsistencyError(ArithmeticError):
    """A quantity that is nonnegative in the limit came out clearly negative."""


class Undefined(enum.Enum):
    """Marker for ``FI(m)`` when the conditioning mass ``sum_{k>=m} p_k`` vanishes."""

    UNDEFINED = "undefined"

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = Undefined.UNDEFINED


@dataclass(frozen=True, eq=False)
class TailRatios:
    """Tail ratios ``gamma_i = lim (1 - F_i(s)) / (1 - F_kappa(s))`` with pivot ``kappa`` (0-based)."""

    gamma: np.ndarray
    kappa: int

    def __post_init__(self) -> None:
        g = np.array(self.gamma, dtype=float).reshape(-1)
        if g.size == 0:
            raise DNormError("gamma must be nonempty")
        if not (g.min() >= 0.0 and g.max() < np.inf):  # also catches NaN
            raise DNormError("gamma entries must be finite and >= 0")
        k = int(self.kappa)
        if not 0 <= k < g.size:
            raise DNormError(f"kappa={k + 1} out of range 1..{g.size}")
        if g[k] != 1.0:
            raise DNormError(f"gamma at kappa={k + 1} must equal 1, got {g[k]!r}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "kappa", k)

    @property
    def d(self) -> int:
        return self.gamma.size

    @classmethod
    def ones(cls, d: int, kappa: int = 0) -> TailRatios:
        return cls(np.ones(d), kappa)

    @classmethod
    def from_gamma(cls, gamma: Sequence[float], kappa: int | None = None) -> TailRatios:
        """Pick ``kappa`` as the first index with ``gamma == 1`` when not given."""
        g = np.asarray(gamma, dtype=float)
        if kappa is None:
            hits = np.flatnonzero(g == 1.0)
            if hits.size == 0:
                raise DNormError("no entry of gamma equals 1; cannot infer kappa")
            kappa = int(hits[0])
        return cls(g, kappa)


@dataclass(frozen=True, eq=False)
class CountCoefficients:
    """``a[0] = a_0`` and ``a[k]`` for ``k = 1..d``."""

    a: np.ndarray

    @property
    def a0(self) -> float:
        return float(self.a[0])


@dataclass(frozen=True, eq=False)
class AcdecDistribution:
    """``p[k-1] = p_k`` for ``k = 1..d``."""

    p: np.ndarray

    def mean(self) -> float:
        return float(np.arange(1, self.p.size + 1) @ self.p)


@dataclass(frozen=True)
class VanishingResult:
    m: int
    result: bool
    witness: tuple[int, ...] | None = None

    def __bool__(self) -> bool:
        return self.result


@functools.lru_cache(maxsize=None)
def popcounts(n: int) -> np.ndarray:
    """Read-only array of set-bit counts of ``0 .. 2^n - 1``."""
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        h = 1 << i
        pc[h : 2 * h] = pc[:h] + 1
    pc.setflags(write=False)
    return pc


@functools.lru_cache(maxsize=None)
def parity_signs(n: int) -> np.ndarray:
    """``(-1)^(|T|+1)`` for every mask ``T`` of ``n`` bits (read-only)."""
    sign = np.where(popcounts(n) % 2 == 1, 1.0, -1.0)
    sign.setflags(write=False)
    return sign


def _check(norm: DNorm, tr: TailRatios) -> None:
    if norm.d != tr.d:
        raise DNormError(f"norm has d={norm.d} but gamma has {tr.d} entries")


def size_grouped_norms(norm: DNorm, tr: TailRatios) -> np.ndarray:
    """``G[r] = sum_{|T| = r} ||sum_{i in T} gamma_i e_i||_D`` for ``r = 0..d``."""
    _check(norm, tr)
    table = norm.subset_norms(tr.gamma)
    return np.bincount(popcounts(tr.d), weights=table, minlength=tr.d + 1)


def coefficients(norm: DNorm, tr: TailRatios) -> CountCoefficients:
    d = tr.d
    grouped = size_grouped_norms(norm, tr)
    a = np.zeros(d + 1)
    a[0] = grouped[d]
    for k in range(1, d + 1):
        acc = 0.0
        for j in range(k + 1):
            sign = -1.0 if (k - j) % 2 == 0 else 1.0
            acc += sign * math.comb(d - j, k - j) * grouped[d - j]
        a[k] = acc
    a0 = a[0]
    if a0 <= 0:
        raise ConsistencyError(f"a_0 = {a0} is not positive")
    if np.any(a[1:] < -CLAMP_TOL * a0):
        k = int(np.flatnonzero(a[1:] < -CLAMP_TOL * a0)[0]) + 1
        raise ConsistencyError(f"a_{k} = {a[k]:.3e} is negative beyond rounding")
    # cancellation residue on either side of a structural zero
    a[1:][np.abs(a[1:]) < CLAMP_TOL * a0] = 0.0
    a.setflags(write=False)
    return CountCoefficients(a)


def acdec(norm: DNorm, tr: TailRatios) -> AcdecDistribution:
    a = coefficients(norm, tr).a
    p = a[1:] / a[0]
    p.setflags(write=False)
    return AcdecDistribution(p)


def fragility_index(norm: DNorm, tr: TailRatios) -> float:
    """``sum gamma_i / ||sum gamma_i e_i||_D``, which lies in ``[1, d]``."""
    _check(norm, tr)
    denom = norm(tr.gamma)
    if denom <= 0:
        raise DNormError("gamma is identically zero")
    return float(tr.gamma.sum() / denom)


def extended_fi(
    norm: DNorm, tr: TailRatios, m: int, eps_mass: float = EPS_MASS
) -> float | Undefined:
    """``lim E(N_s | N_s >= m)``, or :data:`UNDEFINED` if ``sum_{k>=m} p_k`` vanishes."""
    if not 1 <= m <= tr.d:
        raise DNormError(f"m={m} out of range 1..{tr.d}")
    p = acdec(norm, tr).p
    tail = p[m - 1 :]
    mass = tail.sum()
    if mass <= eps_mass:
        return UNDEFINED
    return float(np.arange(m, tr.d + 1) @ tail / mass)


def alternating_unit_sums(norm: DNorm, coords: Sequence[int]) -> np.ndarray:
    """``f[K] = sum_{nonempty T subset of K} (-1)^(|T|-1) ||sum_{i in T} e_i||_D`` over ``coords``.

    For a generator ``Z`` this equals ``E min_{i in K} Z_i``.
    """
    n = len(coords)
    table = norm.subset_norms(None, coords)
    h = parity_signs(n) * table
    h[0] = 0.0
    return _kernels.subset_zeta(h)


def tail_mass_vanishes(
    norm: DNorm, tr: TailRatios, m: int, eps_mass: float = EPS_MASS
) -> VanishingResult:
    """Decide whether ``sum_{k>=m} p_k = 0``.

    The witness is the lexicographically first index set ``K`` (0-based) of
    size ``m`` among the margins with ``gamma_i > 0`` whose alternating unit
    sum exceeds ``eps_mass``.
    """
    _check(norm, tr)
    d = tr.d
    if not 1 <= m <= d:
        raise DNormError(f"m={m} out of range 1..{d}")
    active = np.flatnonzero(tr.gamma > 0)
    if m > active.size:
        return VanishingResult(m, True)
    f = alternating_unit_sums(norm, active)
    masks = np.flatnonzero(popcounts(active.size) == m)
    bad = masks[f[masks] > eps_mass]
    if bad.size == 0:
        return VanishingResult(m, True)
    bad_set = set(bad.tolist())
    for combo in combinations(range(active.size), m):
        mask = sum(1 << j for j in combo)
        if mask in bad_set:
            return VanishingResult(m, False, tuple(int(active[j]) for j in combo))
    raise AssertionError("unreachable")  # pragma: no cover


def summary(norm: DNorm, tr: TailRatios, m: int = 1) -> dict[str, Any]:
    """JSON-ready result bundle; indices in ``witness`` are 1-based."""
    coef = coefficients(norm, tr)
    p = coef.a[1:] / coef.a[0]
    fim = extended_fi(norm, tr, m)
    van = tail_mass_vanishes(norm, tr, m)
    return {
        "a": [float(v) for v in coef.a],
        "p": [float(v) for v in p],
        "fi": fragility_index(norm, tr),
        "fi_m": {"m": m, "value": None if fim is UNDEFINED else fim},
        "vanishes": {
            "m": m,
            "result": van.result,
            "witness": None if van.witness is None else [i + 1 for i in van.witness],
        },
    }
