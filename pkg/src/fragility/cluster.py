"""Asymptotic exceedance-cluster length starting at the pivot index.

``L_kappa(s)`` counts the consecutive exceedances after ``kappa`` given
``X_kappa > s``.  Its limit law is driven by the survival values

    s(k) = sum_{nonempty T subset {kappa..kappa+k}} (-1)^(|T|+1) ||sum_{i in T} gamma_i e_i||_D

which equal ``E min_{kappa <= i <= kappa+k} gamma_i Z_i`` for any generator.
The pivot ``kappa`` of the tail ratios is the start index.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from fragility.dnorm import DNorm, DNormError, Generator, min_moment
from fragility.exceedance import ConsistencyError, TailRatios, parity_signs

PMF_CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ClusterLengthDistribution:
    """Limit law of the cluster length on ``0 .. d - kappa - 1`` (0-based ``kappa``)."""

    kappa: int
    survival: np.ndarray
    pmf: np.ndarray
    cdf: np.ndarray
    mean: float

    @property
    def max_length(self) -> int:
        return self.pmf.size - 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa + 1,
            "survival": [float(v) for v in self.survival],
            "pmf": [float(v) for v in self.pmf],
            "cdf": [float(v) for v in self.cdf],
            "mean": float(self.mean),
        }


def _window(norm: DNorm, tr: TailRatios) -> np.ndarray:
    if norm.d != tr.d:
        raise DNormError(f"norm has d={norm.d} but gamma has {tr.d} entries")
    return np.arange(tr.kappa, tr.d)


def survival_values(norm: DNorm, tr: TailRatios) -> np.ndarray:
    """``s(0), ..., s(d - kappa - 1)`` from one pass over the subsets of the window."""
    coords = _window(norm, tr)
    table = norm.subset_norms(tr.gamma, coords)
    prefix = np.cumsum(parity_signs(coords.size) * table)
    return prefix[_prefix_masks(coords.size)]


def survival(norm: DNorm, tr: TailRatios, k: int) -> float:
    """Limit of ``P(L_kappa(s) >= k | X_kappa > s)``."""
    top = tr.d - tr.kappa - 1
    if not 0 <= k <= top:
        raise DNormError(f"k={k} out of range 0..{top}")
    coords = np.arange(tr.kappa, tr.kappa + k + 1)
    table = norm.subset_norms(tr.gamma, coords)
    return float(parity_signs(coords.size) @ table)


def survival_from_generator(gen: Generator, tr: TailRatios, k: int) -> float:
    """``E min_{kappa <= i <= kappa+k} gamma_i Z_i``."""
    return min_moment(gen, tr.gamma, range(tr.kappa, tr.kappa + k + 1))


def cluster_pmf(norm: DNorm, tr: TailRatios) -> ClusterLengthDistribution:
    surv = survival_values(norm, tr)
    top = surv.size - 1
    pmf = np.empty_like(surv)
    pmf[:-1] = surv[:-1] - surv[1:]
    pmf[-1] = surv[-1]
    if np.any(pmf < -PMF_CLAMP_TOL):
        k = int(np.flatnonzero(pmf < -PMF_CLAMP_TOL)[0])
        raise ConsistencyError(f"cluster pmf at length {k} is {pmf[k]:.3e}")
    if np.any(pmf < 0):
        pmf = np.clip(pmf, 0.0, None)
        pmf /= pmf.sum()
    cdf = np.ones_like(surv)
    cdf[:-1] = 1.0 - surv[1:]
    mean = float(surv[1:].sum()) if top > 0 else 0.0
    for arr in (surv, pmf, cdf):
        arr.setflags(write=False)
    return ClusterLengthDistribution(tr.kappa, surv, pmf, cdf, mean)


def mean_cluster_length(norm: DNorm, tr: TailRatios, exchangeable: bool = False) -> float:
    """``sum_{k>=1} s(k)``; ``exchangeable=True`` routes through :func:`exchangeable_mean`."""
    if exchangeable:
        if not np.all(tr.gamma == 1.0):
            raise DNormError("the exchangeable closed form needs gamma = 1")
        return exchangeable_mean(norm, tr.d, tr.kappa)
    if tr.kappa == tr.d - 1:
        _window(norm, tr)
        return 0.0
    return float(survival_values(norm, tr)[1:].sum())


def exchangeable_mean(norm: DNorm, d: int, kappa: int) -> float:
    """Mean cluster length for an exchangeable norm with unit tail ratios.

    Only the norms of ``e_1 + ... + e_j`` enter.  Exchangeability is the
    caller's promise; it is not checked.
    """
    if norm.d != d:
        raise DNormError(f"norm has d={norm.d}, expected {d}")
    if not 0 <= kappa < d:
        raise DNormError(f"kappa={kappa + 1} out of range 1..{d}")
    span = d - kappa - 1
    # ||e_1 + ... + e_j|| sits at mask 2^j - 1 of the subset table on the first span + 1 margins
    table = norm.subset_norms(None, np.arange(span + 1))
    return float(_exchangeable_weights(span) @ table[_prefix_masks(span + 1)] - 1.0)


@functools.lru_cache(maxsize=None)
def _exchangeable_weights(span: int) -> np.ndarray:
    return np.array([(-1) ** (j + 1) * math.comb(span + 2, j + 1) for j in range(1, span + 2)], dtype=float)


@functools.lru_cache(maxsize=None)
def _prefix_masks(n: int) -> np.ndarray:
    """Masks ``2^j - 1`` of the prefixes ``{0..j-1}`` for ``j = 1..n``."""
    return (1 << np.arange(1, n + 1)) - 1


def pmf_case_split(norm: DNorm, tr: TailRatios) -> np.ndarray:
    """The cluster pmf from the direct alternating sums, one norm evaluation per term.

    Independent of :func:`cluster_pmf`; kept as a cross-check.
    """
    _window(norm, tr)
    d, kap, g = tr.d, tr.kappa, tr.gamma
    top = d - kap - 1
    if top == 0:
        return np.array([1.0])
    out = np.zeros(top + 1)
    for k in range(top + 1):
        base = list(range(kap, kap + k + 1))
        acc = 0.0
        for mask in range(1 << len(base)):
            x = np.zeros(d)
            size = 0
            for j, i in enumerate(base):
                if mask >> j & 1:
                    x[i] = g[i]
                    size += 1
            if k < top:
                x[kap + k + 1] = g[kap + k + 1]
            elif size == 0:
                continue
            acc += (1.0 if size % 2 == 1 else -1.0) * norm(x)
        out[k] = acc
    return out
