"""Sampling the two explicit models and estimating exceedance statistics at finite thresholds.

Weighted Pareto:  ``X_i = sum_j lam_ij Y_j`` with iid Pareto(alpha) ``Y_j`` and
``sum_j lam_ij^alpha = 1``.  GPD copula:  ``X = (beta_1 Z_1, ..., beta_d Z_d) / U``
with a bounded generator ``Z`` and an independent uniform ``U``.

Random numbers come from numpy's PCG64.  A batch of ``n`` rows is cut into
blocks of :data:`BLOCK_ROWS`; block ``b`` uses the ``b``-th child of
``SeedSequence(seed)``, so the draw does not depend on how many threads
(``FRAGILITY_THREADS``) produce the blocks.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from fragility import _kernels
from fragility.cluster import ClusterLengthDistribution, cluster_pmf
from fragility.dnorm import (
    DiscreteGenerator,
    DiscreteGeneratorNorm,
    DNormError,
    IIDUniformNorm,
    norm_from_dict,
)
from fragility.exceedance import TailRatios, acdec, fragility_index

BLOCK_ROWS = 1 << 16
ROW_TOL = 1e-12


def _threads() -> int:
    raw = os.environ.get("FRAGILITY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DNormError(f"FRAGILITY_THREADS must be an integer, got {raw!r}") from None


def iid_uniform_atoms(d: int, n_atoms: int = 64) -> DiscreteGenerator:
    """Rank-1 lattice discretization of ``2 (U_1, ..., U_d)`` with ``n_atoms`` equally likely atoms.

    Coordinate ``i`` of atom ``r`` is ``2 ((r a^i mod n) + 1/2) / n``, so every
    margin is the midpoint rule and has mean exactly 1.  The odd multiplier
    ``a`` is the one minimising :func:`discretization_error`.
    """
    if n_atoms < 2 or n_atoms & (n_atoms - 1):
        raise DNormError("n_atoms must be a power of two >= 2")
    r = np.arange(n_atoms)[:, None]
    best = None
    for a in range(1, n_atoms, 2):
        g = np.array([pow(a, i, n_atoms) for i in range(d)])
        z = 2.0 * (((r * g) % n_atoms) + 0.5) / n_atoms
        gen = DiscreteGenerator(np.full(n_atoms, 1.0 / n_atoms), z)
        err = discretization_error(gen)
        if best is None or err < best[0]:
            best = (err, gen)
    return best[1]


def discretization_error(gen: DiscreteGenerator) -> float:
    """Largest gap between ``E min`` over a run of consecutive coordinates and the iid-uniform value ``2/(len+1)``."""
    z = gen.atoms
    err = 0.0
    for start in range(gen.d):
        run = z[:, start]
        for stop in range(start + 1, gen.d):
            run = np.minimum(run, z[:, stop])
            err = max(err, abs(gen.probs @ run - 2.0 / (stop - start + 2)))
    return err


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedParetoModel:
    alpha: float
    lam: np.ndarray
    kappa: int = 0

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if not alpha > 0 or not math.isfinite(alpha):
            raise DNormError(f"alpha must be > 0, got {self.alpha}")
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 2 or lam.size == 0:
            raise DNormError("lambda must be a nonempty d x m matrix")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise DNormError("lambda weights must be finite and >= 0")
        rows = (lam**alpha).sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > ROW_TOL)
        if bad.size:
            i = int(bad[0])
            raise DNormError(f"row {i + 1} of lambda has sum lam^alpha = {rows[i]:.17g}, not 1")
        if not 0 <= self.kappa < lam.shape[0]:
            raise DNormError(f"kappa={self.kappa + 1} out of range")
        lam.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def normalized(cls, alpha: float, lam: Sequence[Sequence[float]], kappa: int = 0) -> WeightedParetoModel:
        lam = np.asarray(lam, dtype=float)
        scale = (lam**alpha).sum(axis=1, keepdims=True) ** (1.0 / alpha)
        return cls(alpha, lam / scale, kappa)

    @property
    def d(self) -> int:
        return self.lam.shape[0]

    def tail_ratios(self) -> TailRatios:
        return TailRatios.ones(self.d, self.kappa)

    def threshold(self, q: float) -> float:
        """Approximate ``F_kappa``-quantile from ``1 - F(s) ~ s^-alpha``."""
        return (1.0 - q) ** (-1.0 / self.alpha)

    def _block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        y = (1.0 - rng.random((n, self.lam.shape[1]))) ** (-1.0 / self.alpha)
        return y @ self.lam.T

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": "weighted_pareto",
            "alpha": self.alpha,
            "lambda": self.lam.tolist(),
            "kappa": self.kappa + 1,
        }


@dataclass(frozen=True, eq=False)
class GpdCopulaModel:
    beta: np.ndarray
    gen: DiscreteGenerator
    source: dict[str, Any] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if beta.size == 0 or np.any(beta <= 0) or not np.all(np.isfinite(beta)):
            raise DNormError("beta entries must be finite and > 0")
        if not isinstance(self.gen, DiscreteGenerator):
            raise DNormError("the GPD-copula sampler needs a DiscreteGenerator")
        if self.gen.d != beta.size:
            raise DNormError(f"generator has d={self.gen.d} but beta has {beta.size} entries")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def d(self) -> int:
        return self.beta.size

    @property
    def kappa(self) -> int:
        return int(np.argmax(self.beta))

    @property
    def bound(self) -> float:
        """Upper bound ``c`` of the generator's support."""
        return float(self.gen.atoms.max())

    def tail_ratios(self) -> TailRatios:
        k = self.kappa
        g = self.beta / self.beta[k]
        g[k] = 1.0
        return TailRatios(g, k)

    def threshold(self, q: float) -> float:
        """Exact ``F_kappa``-quantile; valid once it clears ``c * beta_kappa``."""
        s = self.beta[self.kappa] / (1.0 - q)
        if s < self.bound * self.beta[self.kappa]:
            raise DNormError(f"quantile level {q} lies below the Pareto part of the margin")
        return float(s)

    def _block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = self.gen.sample(rng, n)
        u = 1.0 - rng.random(n)
        return z * self.beta / u[:, None]

    def to_dict(self) -> dict[str, Any]:
        gen = self.source or {"family": "discrete_generator", "d": self.d, "atoms": self.gen.to_atoms()}
        return {"model": "gpd_copula", "beta": self.beta.tolist(), "generator": gen}


Model = WeightedParetoModel | GpdCopulaModel


def implied_dnorm_weighted_pareto(model: WeightedParetoModel) -> DiscreteGeneratorNorm:
    """``x -> sum_j max_i lam_ij^alpha x_i`` as a generator with ``m`` equally likely atoms."""
    m = model.lam.shape[1]
    atoms = m * (model.lam**model.alpha).T
    return DiscreteGeneratorNorm(DiscreteGenerator(np.full(m, 1.0 / m), atoms))


def implied_dnorm(model: Model) -> DiscreteGeneratorNorm:
    if isinstance(model, WeightedParetoModel):
        return implied_dnorm_weighted_pareto(model)
    return DiscreteGeneratorNorm(model.gen)


def model_from_dict(obj: dict[str, Any]) -> Model:
    kind = obj.get("model") if isinstance(obj, dict) else None
    if kind == "weighted_pareto":
        return WeightedParetoModel(obj["alpha"], obj["lambda"], int(obj.get("kappa", 1)) - 1)
    if kind == "gpd_copula":
        spec = obj.get("generator")
        if spec is None:
            raise DNormError("gpd_copula model needs a 'generator'")
        norm = norm_from_dict(spec)
        if isinstance(norm, IIDUniformNorm):
            gen = iid_uniform_atoms(norm.d)
        else:
            gen = norm.generator
            if not isinstance(gen, DiscreteGenerator):
                raise DNormError(f"generator family {spec.get('family')!r} has no finite atoms to sample")
        return GpdCopulaModel(obj["beta"], gen, spec)
    raise DNormError(f"unknown model {kind!r}; expected 'weighted_pareto' or 'gpd_copula'")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleBatch:
    data: np.ndarray
    model: Model
    seed: int

    @property
    def n(self) -> int:
        return self.data.shape[0]


def _sample(model: Model, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise DNormError(f"n must be >= 1, got {n}")
    sizes = [BLOCK_ROWS] * (n // BLOCK_ROWS)
    if n % BLOCK_ROWS:
        sizes.append(n % BLOCK_ROWS)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(b: int) -> np.ndarray:
        return model._block(np.random.default_rng(children[b]), sizes[b])

    workers = min(_threads(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(b) for b in range(len(sizes))]
    data = np.vstack(blocks)
    data.setflags(write=False)
    return SampleBatch(data, model, seed)


def sample_weighted_pareto(model: WeightedParetoModel, n: int, seed: int) -> SampleBatch:
    if not isinstance(model, WeightedParetoModel):
        raise DNormError("expected a WeightedParetoModel")
    return _sample(model, n, seed)


def sample_gpd_copula(model: GpdCopulaModel, n: int, seed: int) -> SampleBatch:
    if not isinstance(model, GpdCopulaModel):
        raise DNormError("expected a GpdCopulaModel")
    return _sample(model, n, seed)


def sample(model: Model, n: int, seed: int) -> SampleBatch:
    return _sample(model, n, seed)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CountEstimate:
    """Conditional frequencies of ``N_s = k`` given ``N_s > 0`` (``p_hat[k-1]``)."""

    threshold: float
    n_rows: int
    n_exceed: int
    counts: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    fi_hat: float
    fi_se: float

    @property
    def empty(self) -> bool:
        return self.n_exceed == 0


@dataclass(frozen=True, eq=False)
class ClusterEstimate:
    """Run lengths after ``kappa`` (0-based) over rows with ``X_kappa > s``."""

    threshold: float
    kappa: int
    n_cond: int
    counts: np.ndarray
    pmf_hat: np.ndarray
    cdf_hat: np.ndarray
    cdf_se: np.ndarray
    mean_hat: float
    mean_se: float

    @property
    def empty(self) -> bool:
        return self.n_cond == 0


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    """``#{X_i > s} / #{X_kappa > s}`` with delta-method standard errors."""

    threshold: float
    kappa: int
    gamma_hat: np.ndarray
    se: np.ndarray
    n_pivot: int

    @property
    def empty(self) -> bool:
        return self.n_pivot == 0


@dataclass(frozen=True, eq=False)
class EmpiricalEstimates:
    counts: CountEstimate
    cluster: ClusterEstimate
    gamma: GammaEstimate

    @property
    def threshold(self) -> float:
        return self.counts.threshold


def _data(batch: SampleBatch | np.ndarray) -> np.ndarray:
    return batch.data if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)


def empirical_acdec(batch: SampleBatch | np.ndarray, s: float) -> CountEstimate:
    if not math.isfinite(s):
        raise DNormError("threshold must be finite")
    x = _data(batch)
    n_rows, d = x.shape
    n_s = (x > s).sum(axis=1)
    counts = np.bincount(n_s, minlength=d + 1)
    pos = int(n_rows - counts[0])
    if pos == 0:
        nan = np.full(d, np.nan)
        return CountEstimate(s, n_rows, 0, counts, nan, nan.copy(), math.nan, math.nan)
    p_hat = counts[1:] / pos
    se = np.sqrt(p_hat * (1.0 - p_hat) / pos)
    hits = n_s[n_s > 0]
    fi_hat = float(hits.mean())
    fi_se = float(hits.std(ddof=1) / math.sqrt(pos)) if pos > 1 else math.nan
    return CountEstimate(s, n_rows, pos, counts, p_hat, se, fi_hat, fi_se)


def empirical_cluster(batch: SampleBatch | np.ndarray, s: float, kappa: int) -> ClusterEstimate:
    x = _data(batch)
    d = x.shape[1]
    if not 0 <= kappa < d:
        raise DNormError(f"kappa={kappa + 1} out of range 1..{d}")
    top = d - kappa - 1
    exceed = x > s
    rows = exceed[exceed[:, kappa]]
    n_cond = rows.shape[0]
    if n_cond == 0:
        nan = np.full(top + 1, np.nan)
        return ClusterEstimate(s, kappa, 0, np.zeros(top + 1, dtype=np.int64), nan, nan.copy(), nan.copy(), math.nan, math.nan)
    lengths = _kernels.run_lengths(np.ascontiguousarray(rows), kappa)
    counts = np.bincount(lengths, minlength=top + 1)
    pmf = counts / n_cond
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    cdf_se = np.sqrt(cdf * (1.0 - cdf) / n_cond)
    mean_se = float(lengths.std(ddof=1) / math.sqrt(n_cond)) if n_cond > 1 else math.nan
    return ClusterEstimate(s, kappa, n_cond, counts, pmf, cdf, cdf_se, float(lengths.mean()), mean_se)


def empirical_gamma(batch: SampleBatch | np.ndarray, s: float, kappa: int) -> GammaEstimate:
    x = _data(batch)
    d = x.shape[1]
    if not 0 <= kappa < d:
        raise DNormError(f"kappa={kappa + 1} out of range 1..{d}")
    exceed = x > s
    piv = exceed[:, kappa]
    b = int(piv.sum())
    if b == 0:
        nan = np.full(d, np.nan)
        return GammaEstimate(s, kappa, nan, nan.copy(), 0)
    a = exceed.sum(axis=0).astype(float)
    both = exceed[piv].sum(axis=0).astype(float)
    g = a / b
    g[kappa] = 1.0
    # Poisson-regime delta method for a ratio of two correlated counts
    var = np.clip(a + g**2 * b - 2.0 * g * both, 0.0, None) / b**2
    return GammaEstimate(s, kappa, g, np.sqrt(var), b)


def estimate(batch: SampleBatch, s: float, kappa: int) -> EmpiricalEstimates:
    return EmpiricalEstimates(
        empirical_acdec(batch, s), empirical_cluster(batch, s, kappa), empirical_gamma(batch, s, kappa)
    )


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theory:
    p: np.ndarray
    fi: float
    cluster: ClusterLengthDistribution
    gamma: np.ndarray


def theory(model: Model) -> Theory:
    norm = implied_dnorm(model)
    tr = model.tail_ratios()
    return Theory(acdec(norm, tr).p, fragility_index(norm, tr), cluster_pmf(norm, tr), tr.gamma)


@dataclass(frozen=True)
class SweepRow:
    q: float
    s: float
    est: EmpiricalEstimates


@dataclass(frozen=True)
class SweepTable:
    rows: list[SweepRow]
    theory: Theory
    model: Model
    n: int
    seed: int

    @property
    def d(self) -> int:
        return self.model.d

    def header(self) -> list[str]:
        return ["q", "s", "k", "p_hat", "p_theory", "se", "fi_hat", "fi_theory"] + [
            f"gamma_hat_{i + 1}" for i in range(self.d)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        for row in self.rows:
            c, g = row.est.counts, row.est.gamma
            for k in range(1, self.d + 1):
                vals = [row.q, row.s, k, c.p_hat[k - 1], self.theory.p[k - 1], c.se[k - 1], c.fi_hat, self.theory.fi]
                vals += list(g.gamma_hat)
                buf.write(",".join(_fmt(v) for v in vals) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        th = self.theory
        return {
            "model": self.model.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "theory": {
                "p": th.p.tolist(),
                "fi": th.fi,
                "gamma": th.gamma.tolist(),
                "cluster": th.cluster.to_dict(),
            },
            "rows": [_row_dict(r) for r in self.rows],
        }


def _fmt(v: Any) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _floats(arr: np.ndarray) -> list[float | None]:
    return [None if not math.isfinite(v) else float(v) for v in arr]


def _num(v: float) -> float | None:
    return float(v) if math.isfinite(v) else None


def _row_dict(row: SweepRow) -> dict[str, Any]:
    c, cl, g = row.est.counts, row.est.cluster, row.est.gamma
    return {
        "q": row.q,
        "s": row.s,
        "n_exceed": c.n_exceed,
        "p_hat": _floats(c.p_hat),
        "se": _floats(c.se),
        "fi_hat": _num(c.fi_hat),
        "fi_se": _num(c.fi_se),
        "cluster": {
            "kappa": cl.kappa + 1,
            "n_cond": cl.n_cond,
            "counts": cl.counts.tolist(),
            "cdf_hat": _floats(cl.cdf_hat),
            "cdf_se": _floats(cl.cdf_se),
            "mean_hat": _num(cl.mean_hat),
        },
        "gamma_hat": _floats(g.gamma_hat),
        "gamma_se": _floats(g.se),
    }


def convergence_sweep(model: Model, quantiles: Sequence[float], n: int, seed: int) -> SweepTable:
    """One row of estimates per quantile level, all from a single batch."""
    qs = [float(q) for q in quantiles]
    if any(not 0.0 < q < 1.0 for q in qs):
        raise DNormError("quantile levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise DNormError("quantile levels must be strictly increasing")
    th = theory(model)
    if not qs:
        return SweepTable([], th, model, n, seed)
    batch = sample(model, n, seed)
    kappa = model.tail_ratios().kappa
    rows = []
    for q in qs:
        s = model.threshold(q)
        rows.append(SweepRow(q, s, estimate(batch, s, kappa)))
    return SweepTable(rows, th, model, n, seed)
