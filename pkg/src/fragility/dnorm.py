"""D-norms, their generators, and the expectation primitives built on them.

A D-norm on R^d satisfies ``||e_i||_D = 1`` and can always be written as
``||x||_D = E max_i |x_i| Z_i`` for a bounded nonnegative generator ``Z`` with
``E Z_i = 1``.  Only the nonnegative orthant is represented here.

Indices are 0-based throughout the Python API.  Subset tables returned by
:meth:`DNorm.subset_norms` are indexed by bitmask over the requested
coordinates (bit ``j`` = ``coords[j]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np

from fragility import _kernels

MAX_DIM = 24
UNIT_MEAN_TOL = 1e-12


class DNormError(ValueError):
    """Invalid norm or generator specification."""


def _check_dim(d: int) -> int:
    d = int(d)
    if d < 1:
        raise DNormError(f"dimension must be >= 1, got {d}")
    if d > MAX_DIM:
        raise DNormError(f"dimension {d} exceeds the enumeration cap d <= {MAX_DIM}")
    return d


def _as_nonneg(x: Sequence[float] | np.ndarray, d: int, what: str = "x") -> np.ndarray:
    arr = np.abs(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != d:
        raise DNormError(f"{what} has shape {arr.shape}, expected ({d},)")
    if arr.size and not arr.max() < np.inf:  # also catches NaN
        raise DNormError(f"{what} must be finite")
    return arr


def _as_index_set(K: Sequence[int], d: int) -> np.ndarray:
    idx = np.unique(np.asarray(list(K), dtype=np.int64))
    if idx.size == 0:
        raise DNormError("index set K must be nonempty")
    if idx[0] < 0 or idx[-1] >= d:
        raise DNormError(f"index set {list(K)} out of range for d={d}")
    return idx


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteGenerator:
    """Generator with finitely many atoms.

    ``probs[r]`` is the probability of atom ``r`` and ``atoms[r]`` its value
    in ``[0, c]^d``.  Construction validates ``E Z_i = 1`` to 1e-12.
    """

    probs: np.ndarray
    atoms: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        z = np.asarray(self.atoms, dtype=float)
        if z.ndim != 2 or z.shape[0] != p.shape[0] or z.shape[0] == 0:
            raise DNormError(f"atoms shape {z.shape} does not match {p.shape[0]} probabilities")
        _check_dim(z.shape[1])
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(p)):
            raise DNormError("generator atoms and probabilities must be finite")
        if np.any(p <= 0):
            raise DNormError("atom probabilities must be > 0")
        if abs(p.sum() - 1.0) > UNIT_MEAN_TOL:
            raise DNormError(f"atom probabilities sum to {p.sum():.17g}, not 1")
        if np.any(z < 0):
            r, i = np.argwhere(z < 0)[0]
            raise DNormError(f"generator atom {r} has negative entry at index {i + 1}")
        means = p @ z
        bad = np.flatnonzero(np.abs(means - 1.0) > UNIT_MEAN_TOL)
        if bad.size:
            i = int(bad[0])
            raise DNormError(f"generator mean != 1 at index {i + 1} (got {means[i]:.17g})")
        p.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "atoms", z)

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_unnormalized(cls, probs: Sequence[float], atoms: Sequence[Sequence[float]]) -> DiscreteGenerator:
        """Rescale each coordinate so the means are exactly 1 (columns must not be all zero)."""
        p = np.asarray(probs, dtype=float)
        p = p / p.sum()
        z = np.asarray(atoms, dtype=float)
        means = p @ z
        if np.any(means <= 0):
            raise DNormError("cannot normalise a coordinate that is identically zero")
        z = z / means
        # one correction pass absorbs the rounding left by the division
        z = z / (p @ z)
        return cls(p, z)

    def max_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        return float(self.probs @ (self.atoms[:, idx] * weights[idx]).max(axis=1))

    def min_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        return float(self.probs @ (self.atoms[:, idx] * weights[idx]).min(axis=1))

    def subset_max_table(self, weights: np.ndarray) -> np.ndarray:
        return _kernels.weighted_subset_max(self.atoms, self.probs, weights)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        pick = rng.choice(self.probs.shape[0], size=n, p=self.probs)
        return self.atoms[pick]

    def to_atoms(self) -> list[dict[str, Any]]:
        return [{"p": float(p), "z": [float(v) for v in z]} for p, z in zip(self.probs, self.atoms)]


@dataclass(frozen=True)
class IIDUniformGenerator:
    """``Z = 2 (U_1, ..., U_d)`` with iid Uniform(0,1) ``U_i``; moments are exact."""

    d: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))

    def max_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        b = np.sort(2.0 * weights[idx])
        b = b[b > 0]
        if b.size == 0:
            return 0.0
        # E max = b_max - int_0^{b_max} prod_i min(t / b_i, 1) dt, piecewise between sorted b
        integral, lo = 0.0, 0.0
        for j, hi in enumerate(b):
            rest = b[j:]
            integral += (hi * np.prod(hi / rest) - lo * np.prod(lo / rest)) / (rest.size + 1)
            lo = hi
        return float(b[-1] - integral)

    def min_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        b = 2.0 * weights[idx]
        if np.any(b == 0):
            return 0.0
        # E min = int_0^{min b} prod_i (1 - t / b_i) dt; the integrand is a
        # polynomial of degree len(b), so Gauss-Legendre with this many nodes is exact
        nodes, wts = np.polynomial.legendre.leggauss(b.size // 2 + 1)
        top = b.min()
        t = 0.5 * top * (nodes + 1.0)
        surv = np.prod(1.0 - t[:, None] / b[None, :], axis=1)
        return float(0.5 * top * (wts @ surv))

    def subset_max_table(self, weights: np.ndarray) -> np.ndarray:
        return _kernels.iid_uniform_subset_max(np.ascontiguousarray(2.0 * weights))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return 2.0 * rng.random((n, self.d))


Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class EmpiricalGenerator:
    """Equally weighted atoms drawn from a sampler, columns rescaled to mean 1.

    The rescaling makes the sample itself a valid generator, so the norm it
    induces satisfies every D-norm property exactly (up to rounding) while
    estimating the norm of the sampled law.  ``*_se`` methods return the
    usual ``sd / sqrt(N)`` Monte-Carlo standard error.
    """

    samples: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.samples, dtype=float)
        if z.ndim != 2 or z.shape[0] == 0:
            raise DNormError("empirical generator needs a nonempty (N, d) sample")
        _check_dim(z.shape[1])
        if np.any(z < 0) or not np.all(np.isfinite(z)):
            raise DNormError("generator samples must be finite and nonnegative")
        means = z.mean(axis=0)
        if np.any(means <= 0):
            i = int(np.flatnonzero(means <= 0)[0])
            raise DNormError(f"generator mean != 1 at index {i + 1} (sample mean is zero)")
        z = z / means
        z.setflags(write=False)
        object.__setattr__(self, "samples", z)

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @cached_property
    def _uniform_probs(self) -> np.ndarray:
        n = self.samples.shape[0]
        return np.full(n, 1.0 / n)

    def _stat(self, weights: np.ndarray, idx: np.ndarray, how: str) -> np.ndarray:
        wz = self.samples[:, idx] * weights[idx]
        return wz.max(axis=1) if how == "max" else wz.min(axis=1)

    def max_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        return float(self._stat(weights, idx, "max").mean())

    def min_moment(self, weights: np.ndarray, idx: np.ndarray) -> float:
        return float(self._stat(weights, idx, "min").mean())

    def _se(self, weights: np.ndarray, idx: np.ndarray, how: str) -> float:
        # Linearize in the estimated column means: each row contributes
        # stat_r - sum_j c_j (z_rj - 1), c_j = mean of w_j z_rj over rows where j attains the extremum.
        wz = self.samples[:, idx] * weights[idx]
        pick = wz.argmax(axis=1) if how == "max" else wz.argmin(axis=1)
        rows = np.arange(wz.shape[0])
        stat = wz[rows, pick]
        hit = np.zeros_like(wz)
        hit[rows, pick] = stat
        c = hit.mean(axis=0)
        infl = stat - (self.samples[:, idx] - 1.0) @ c
        return float(infl.std(ddof=1) / math.sqrt(infl.size))

    def max_moment_se(self, weights: np.ndarray, idx: np.ndarray) -> float:
        """Delta-method standard error of :meth:`max_moment`, accounting for the mean rescaling."""
        return self._se(weights, idx, "max")

    def min_moment_se(self, weights: np.ndarray, idx: np.ndarray) -> float:
        """Delta-method standard error of :meth:`min_moment`."""
        return self._se(weights, idx, "min")

    def subset_max_table(self, weights: np.ndarray) -> np.ndarray:
        return _kernels.weighted_subset_max(self.samples, self._uniform_probs, weights)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.samples[rng.integers(0, self.samples.shape[0], size=n)]


Generator = DiscreteGenerator | IIDUniformGenerator | EmpiricalGenerator


def make_xi_generator() -> DiscreteGenerator:
    """Three-point generator whose componentwise minimum is 0 although no pair is independent."""
    probs = np.array([1 / 6, 1 / 3, 1 / 2])
    atoms = np.array(
        [
            [0.0, 1.5, 2.0],
            [1.2, 0.0, 2.0],
            [1.2, 1.5, 0.0],
        ]
    )
    return DiscreteGenerator(probs, atoms)


def _prep_weights(gen: Generator, weights: Sequence[float] | np.ndarray | None) -> np.ndarray:
    if weights is None:
        return np.ones(gen.d)
    return _as_nonneg(weights, gen.d, "weights")


def max_moment(gen: Generator, weights: Sequence[float] | np.ndarray | None, K: Sequence[int]) -> float:
    """``E max_{i in K} weights_i Z_i``; ``weights=None`` means all ones."""
    w = _prep_weights(gen, weights)
    return gen.max_moment(w, _as_index_set(K, gen.d))


def min_moment(gen: Generator, weights: Sequence[float] | np.ndarray | None, K: Sequence[int]) -> float:
    """``E min_{i in K} weights_i Z_i``; ``weights=None`` means all ones."""
    w = _prep_weights(gen, weights)
    return gen.min_moment(w, _as_index_set(K, gen.d))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


class DNorm:
    """Base class.  Subclasses are frozen dataclasses with a ``d`` field."""

    family: str = ""
    d: int

    def __call__(self, x: Sequence[float] | np.ndarray) -> float:
        v = _as_nonneg(x, self.d)
        if not np.any(v):
            return 0.0
        return self._eval(v)

    def _eval(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _table(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subset_norms(
        self,
        weights: Sequence[float] | np.ndarray | None = None,
        coords: Sequence[int] | None = None,
    ) -> np.ndarray:
        """Table of ``||sum_{i in T} w_i e_i||_D`` for every ``T`` subset of ``coords``.

        The result has length ``2**len(coords)``; entry ``mask`` corresponds to
        ``T = {coords[j] : bit j of mask set}``.
        """
        w = np.ones(self.d) if weights is None else _as_nonneg(weights, self.d, "weights")
        if coords is None:
            sub = np.arange(self.d)
        else:
            sub = np.asarray(coords if isinstance(coords, np.ndarray) else list(coords), dtype=np.int64)
            listed = sub.tolist()
            if any(not 0 <= c < self.d for c in listed) or len(set(listed)) != len(listed):
                raise DNormError(f"invalid coordinate list {listed} for d={self.d}")
        return self._table(np.ascontiguousarray(w[sub]), sub)

    @property
    def generator(self) -> Generator | None:
        """A generator of this norm, when one is representable."""
        return None

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class LambdaNorm(DNorm):
    """``(sum x_i^lam)^(1/lam)``; ``lam = 1`` is independence, ``lam -> inf`` the max-norm."""

    d: int
    lam: float
    family = "lambda"

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))
        lam = float(self.lam)
        if not (lam >= 1.0) or math.isinf(lam):
            raise DNormError(f"lambda must be a finite real >= 1, got {self.lam}")
        object.__setattr__(self, "lam", lam)

    def _eval(self, x: np.ndarray) -> float:
        if self.lam == 1.0:
            return float(x.sum())
        m = x.max()
        return float(m * ((x / m) ** self.lam).sum() ** (1.0 / self.lam))

    def _table(self, w: np.ndarray, coords: np.ndarray) -> np.ndarray:
        if self.lam == 1.0:
            return _kernels.subset_sums(w)
        return _kernels.subset_sums(w**self.lam) ** (1.0 / self.lam)

    @property
    def generator(self) -> Generator | None:
        if self.lam == 1.0:
            return DiscreteGenerator(np.full(self.d, 1.0 / self.d), self.d * np.eye(self.d))
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "d": self.d, "lambda": self.lam}


@dataclass(frozen=True)
class MaxNorm(DNorm):
    """Complete dependence."""

    d: int
    family = "max"

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))

    def _eval(self, x: np.ndarray) -> float:
        return float(x.max())

    def _table(self, w: np.ndarray, coords: np.ndarray) -> np.ndarray:
        return _kernels.subset_maxes(w)

    @property
    def generator(self) -> Generator | None:
        return DiscreteGenerator(np.array([1.0]), np.ones((1, self.d)))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "d": self.d}


@dataclass(frozen=True)
class MarshallOlkinNorm(DNorm):
    """``theta * ||x||_1 + (1 - theta) * ||x||_inf``."""

    d: int
    theta: float
    family = "marshall_olkin"

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))
        theta = float(self.theta)
        if not (0.0 <= theta <= 1.0):
            raise DNormError(f"theta must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "theta", theta)

    def _eval(self, x: np.ndarray) -> float:
        return float(self.theta * x.sum() + (1.0 - self.theta) * x.max())

    def _table(self, w: np.ndarray, coords: np.ndarray) -> np.ndarray:
        return self.theta * _kernels.subset_sums(w) + (1.0 - self.theta) * _kernels.subset_maxes(w)

    @property
    def generator(self) -> Generator | None:
        # mixture: with prob theta pick d * e_J (J uniform), else the constant 1
        d, t = self.d, self.theta
        parts_p, parts_z = [], []
        if t > 0:
            parts_p.append(np.full(d, t / d))
            parts_z.append(d * np.eye(d))
        if t < 1:
            parts_p.append(np.array([1.0 - t]))
            parts_z.append(np.ones((1, d)))
        return DiscreteGenerator(np.concatenate(parts_p), np.vstack(parts_z))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "d": self.d, "theta": self.theta}


class _GeneratorBacked(DNorm):
    gen: Generator

    def _eval(self, x: np.ndarray) -> float:
        return self.gen.max_moment(x, np.arange(self.d))

    def _table(self, w: np.ndarray, coords: np.ndarray) -> np.ndarray:
        if isinstance(self.gen, IIDUniformGenerator):
            return self.gen.subset_max_table(w)
        full = np.zeros(self.d)
        full[coords] = w
        if coords.size == self.d and np.array_equal(coords, np.arange(self.d)):
            return self.gen.subset_max_table(full)
        # restrict the atoms to the requested coordinates
        if isinstance(self.gen, DiscreteGenerator):
            return _kernels.weighted_subset_max(
                np.ascontiguousarray(self.gen.atoms[:, coords]), self.gen.probs, w
            )
        return _kernels.weighted_subset_max(
            np.ascontiguousarray(self.gen.samples[:, coords]), self.gen._uniform_probs, w
        )

    @property
    def generator(self) -> Generator | None:
        return self.gen


@dataclass(frozen=True, eq=False)
class DiscreteGeneratorNorm(_GeneratorBacked):
    """``x -> sum_r p_r max_i x_i z_i(r)``."""

    gen: DiscreteGenerator
    family = "discrete_generator"

    def __post_init__(self) -> None:
        if not isinstance(self.gen, DiscreteGenerator):
            raise DNormError("DiscreteGeneratorNorm needs a DiscreteGenerator")

    @property
    def d(self) -> int:  # type: ignore[override]
        return self.gen.d

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "d": self.d, "atoms": self.gen.to_atoms()}


@dataclass(frozen=True)
class IIDUniformNorm(_GeneratorBacked):
    """Norm generated by ``2 (U_1, ..., U_d)``, evaluated in closed form."""

    d: int
    family = "iid_uniform"

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))

    @property
    def gen(self) -> IIDUniformGenerator:  # type: ignore[override]
        return IIDUniformGenerator(self.d)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "d": self.d}


def _xi_sampler(rng: np.random.Generator, n: int) -> np.ndarray:
    return make_xi_generator().sample(rng, n)


SAMPLERS: dict[str, Callable[[int], Sampler]] = {
    "xi": lambda d: _xi_sampler,
    "iid_uniform": lambda d: IIDUniformGenerator(d).sample,
}
_SAMPLER_DIMS = {"xi": 3}


@dataclass(frozen=True, eq=False)
class MonteCarloNorm(_GeneratorBacked):
    """Norm of an :class:`EmpiricalGenerator` built from ``n_samples`` seeded draws.

    ``sampler`` names an entry of :data:`SAMPLERS`, or is ``"discrete"`` with
    ``atoms`` supplying the law to draw from.  The draw is a single stream
    from ``numpy.random.default_rng(seed)``, so results are bit-reproducible.
    """

    d: int
    sampler: str
    n_samples: int = 1_000_000
    seed: int = 0
    atoms: DiscreteGenerator | None = None
    family = "mc_generator"

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _check_dim(self.d))
        if self.n_samples < 2:
            raise DNormError("n_samples must be >= 2")
        if self.sampler == "discrete":
            if self.atoms is None or self.atoms.d != self.d:
                raise DNormError("sampler 'discrete' needs atoms of matching dimension")
        elif self.sampler not in SAMPLERS:
            raise DNormError(f"unknown sampler {self.sampler!r}; known: {sorted(SAMPLERS)} or 'discrete'")
        elif _SAMPLER_DIMS.get(self.sampler, self.d) != self.d:
            raise DNormError(f"sampler {self.sampler!r} has dimension {_SAMPLER_DIMS[self.sampler]}")

    @cached_property
    def gen(self) -> EmpiricalGenerator:  # type: ignore[override]
        rng = np.random.default_rng(self.seed)
        draw = self.atoms.sample if self.sampler == "discrete" else SAMPLERS[self.sampler](self.d)
        return EmpiricalGenerator(draw(rng, self.n_samples))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "family": self.family,
            "d": self.d,
            "sampler": self.sampler,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }
        if self.atoms is not None:
            out["atoms"] = self.atoms.to_atoms()
        return out


def evaluate(norm: DNorm, x: Sequence[float] | np.ndarray) -> float:
    """``||x||_D`` (absolute values are taken componentwise)."""
    return norm(x)


def l1_norm(d: int) -> LambdaNorm:
    return LambdaNorm(d, 1.0)


def xi_norm() -> DiscreteGeneratorNorm:
    return DiscreteGeneratorNorm(make_xi_generator())


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _generator_from_atoms(atoms: list[dict[str, Any]]) -> DiscreteGenerator:
    try:
        probs = [float(a["p"]) for a in atoms]
        z = [[float(v) for v in a["z"]] for a in atoms]
    except (KeyError, TypeError) as exc:
        raise DNormError(f"malformed atoms: {exc}") from exc
    if len({len(row) for row in z}) != 1:
        raise DNormError("all atoms must have the same dimension")
    return DiscreteGenerator(np.array(probs), np.array(z))


def norm_from_dict(obj: dict[str, Any]) -> DNorm:
    if not isinstance(obj, dict) or "family" not in obj:
        raise DNormError("norm spec must be an object with a 'family' key")
    fam = obj["family"]
    d = obj.get("d")
    if fam == "discrete_generator":
        gen = _generator_from_atoms(obj.get("atoms") or [])
        if d is not None and int(d) != gen.d:
            raise DNormError(f"d={d} disagrees with atom dimension {gen.d}")
        return DiscreteGeneratorNorm(gen)
    if d is None:
        raise DNormError(f"family {fam!r} requires 'd'")
    if fam == "lambda":
        return LambdaNorm(d, obj["lambda"])
    if fam == "max":
        return MaxNorm(d)
    if fam == "marshall_olkin":
        return MarshallOlkinNorm(d, obj["theta"])
    if fam == "iid_uniform":
        return IIDUniformNorm(d)
    if fam == "mc_generator":
        atoms = obj.get("atoms")
        sampler = obj.get("sampler", "discrete" if atoms else "iid_uniform")
        return MonteCarloNorm(
            d,
            sampler,
            int(obj.get("n_samples", 1_000_000)),
            int(obj.get("seed", 0)),
            _generator_from_atoms(atoms) if atoms else None,
        )
    raise DNormError(f"unknown norm family {fam!r}")
