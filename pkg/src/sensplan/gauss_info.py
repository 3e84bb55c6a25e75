"""Gaussian entropies, mutual information and Schur-complement conditioning.

Two layers live here.  The label-based functions (`condition`, `entropy`,
`mutual_info`, `cond_mutual_info`) work on a :class:`JointGaussian` and are
the reference path.  :class:`GaussianEngine` precomputes the prior and
target-conditioned measurement covariances once and evaluates utilities by
principal-submatrix log-determinants, which is what the games call in their
inner loops.

All logarithms are natural (nats).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg.lapack import dpotrf

from .errors import NotPositiveDefinite, SingularConditioningBlock

LOG_2PIE = float(np.log(2.0 * np.pi * np.e))
JITTER = 1e-10

SENSING = "sensing"
TARGET = "target"


@dataclass(frozen=True)
class VariableSet:
    """Ordered variable labels, each tagged as a sensing state or a target state."""

    labels: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if len(self.labels) != len(self.kinds):
            raise ValueError("labels and kinds differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("variable labels must be unique")
        bad = set(self.kinds) - {SENSING, TARGET}
        if bad:
            raise ValueError(f"unknown variable kinds: {sorted(bad)}")
        object.__setattr__(self, "_index", {lab: k for k, lab in enumerate(self.labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, labels: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self._index[lab] for lab in labels], dtype=int)
        except KeyError as exc:
            raise KeyError(f"unknown variable label {exc.args[0]!r}") from None

    def kind(self, label: str) -> str:
        return self.kinds[self._index[label]]

    @property
    def sensing(self) -> tuple[str, ...]:
        return tuple(lab for lab, k in zip(self.labels, self.kinds) if k == SENSING)

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(lab for lab, k in zip(self.labels, self.kinds) if k == TARGET)


@dataclass(frozen=True)
class NoiseModel:
    """Additive white measurement noise variance per sensing label."""

    variances: Mapping[str, float]

    def __post_init__(self):
        for lab, r in self.variances.items():
            if not r > 0:
                raise ValueError(f"noise variance for {lab!r} must be positive, got {r}")

    @classmethod
    def uniform(cls, labels: Iterable[str], r: float) -> "NoiseModel":
        return cls({lab: float(r) for lab in labels})

    def diag(self, labels: Sequence[str], vars: VariableSet) -> np.ndarray:
        """Noise variances for `labels` (zero for target labels)."""
        return np.array(
            [self.variances[lab] if vars.kind(lab) == SENSING else 0.0 for lab in labels]
        )


@dataclass(frozen=True)
class JointGaussian:
    vars: VariableSet
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        n = len(self.vars)
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match {n} variables")
        scale = max(np.abs(cov).max(), 1e-300)
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if n and np.linalg.eigvalsh(cov).min() < -1e-10 * np.trace(cov):
            raise NotPositiveDefinite("covariance is not positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    def block(self, rows: Sequence[str], cols: Sequence[str] | None = None) -> np.ndarray:
        ri = self.vars.index(rows)
        ci = ri if cols is None else self.vars.index(cols)
        return self.cov[np.ix_(ri, ci)]


def _potrf(m: np.ndarray) -> np.ndarray | None:
    chol, info = dpotrf(m, lower=1, clean=1, overwrite_a=0)
    return chol if info == 0 else None


def _cholesky(m: np.ndarray, exc: type[Exception] = NotPositiveDefinite) -> np.ndarray:
    """Lower Cholesky factor of the symmetrized matrix, retried once with diagonal jitter."""
    m = 0.5 * (m + m.T)
    chol = _potrf(m)
    if chol is not None:
        return chol
    n = m.shape[0]
    jitter = JITTER * np.trace(m) / n
    chol = _potrf(m + jitter * np.eye(n))
    if chol is None:
        raise exc(f"{n}x{n} matrix is not positive definite (jitter {jitter:.3g})")
    return chol


def log_det(m: np.ndarray) -> float:
    """log|M| of a symmetric positive-definite matrix through its Cholesky factor."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    chol = _cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def gaussian_entropy(cov: np.ndarray) -> float:
    """Differential entropy (nats) of a Gaussian with covariance `cov`."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = cov.shape[0]
    return 0.5 * n * LOG_2PIE + 0.5 * log_det(cov)


def _noisy_block(jg: JointGaussian, labels: Sequence[str], noise: NoiseModel | None) -> np.ndarray:
    cov = jg.block(labels).copy()
    if noise is not None and len(labels):
        cov[np.diag_indices_from(cov)] += noise.diag(labels, jg.vars)
    return cov


def condition(
    jg: JointGaussian,
    keep: Sequence[str],
    given: Sequence[str] = (),
    noise: NoiseModel | None = None,
) -> np.ndarray:
    """Covariance of `keep` given `given` via the Schur complement.

    With `noise`, sensing labels stand for their measurements z = x + w, so the
    noise variance is added to their diagonal entries (in both blocks) while
    cross-covariances stay those of the states.
    """
    keep, given = list(keep), list(given)
    if set(keep) & set(given):
        raise ValueError("keep and given label sets must be disjoint")
    p_aa = _noisy_block(jg, keep, noise)
    if not given:
        return p_aa
    p_cc = _noisy_block(jg, given, noise)
    p_ac = jg.block(keep, given)
    chol = _cholesky(p_cc, SingularConditioningBlock)
    half = np.linalg.solve(chol, p_ac.T)
    out = p_aa - half.T @ half
    return 0.5 * (out + out.T)


def entropy(jg: JointGaussian, labels: Sequence[str], noise: NoiseModel | None = None) -> float:
    labels = list(labels)
    if not labels:
        raise ValueError("entropy of an empty variable set")
    return gaussian_entropy(_noisy_block(jg, labels, noise))


def cond_mutual_info(
    jg: JointGaussian,
    meas: Sequence[str],
    targets: Sequence[str],
    given: Sequence[str] = (),
    noise: NoiseModel | None = None,
) -> float:
    """I(x_T; z_A | z_C) = H(z_A | z_C) - H(z_A | x_T, z_C)."""
    meas, targets, given = list(meas), list(targets), list(given)
    if not meas or not targets:
        return 0.0
    prior = condition(jg, meas, given, noise)
    post = condition(jg, meas, targets + given, noise)
    return gaussian_entropy(prior) - gaussian_entropy(post)


def mutual_info(
    jg: JointGaussian,
    meas: Sequence[str],
    targets: Sequence[str],
    noise: NoiseModel | None = None,
) -> float:
    """Backward-scheme I(x_T; z_A) = 1/2 log|P(z_A)| - 1/2 log|P(z_A | x_T)|."""
    return cond_mutual_info(jg, meas, targets, (), noise)


def mutual_info_forward(
    jg: JointGaussian,
    meas: Sequence[str],
    targets: Sequence[str],
    noise: NoiseModel | None = None,
) -> float:
    """Forward form H(x_T) - H(x_T | z_A); used to cross-check the backward scheme."""
    meas, targets = list(meas), list(targets)
    if not meas or not targets:
        return 0.0
    return gaussian_entropy(jg.block(targets)) - gaussian_entropy(
        condition(jg, targets, meas, noise)
    )


class GaussianEngine:
    """Measurement-space information engine for a linear-Gaussian sensing model.

    Holds P(x_S) and P(x_S | x_t) over the candidate sensing points (indexed
    0..M-1) together with per-point noise variances.  Selections are index
    multisets; a repeated index is a repeated measurement with independent
    noise.  Log-determinants are memoized per (matrix, sorted index multiset).
    """

    def __init__(
        self,
        prior: np.ndarray,
        posterior: np.ndarray,
        noise: np.ndarray | float,
        labels: Sequence[str] | None = None,
        cache_size: int = 200_000,
    ):
        prior = np.array(prior, dtype=float)
        posterior = np.array(posterior, dtype=float)
        m = prior.shape[0]
        if prior.shape != (m, m) or posterior.shape != (m, m):
            raise ValueError("prior and posterior must be square with equal size")
        self.prior = 0.5 * (prior + prior.T)
        self.posterior = 0.5 * (posterior + posterior.T)
        self.noise = np.broadcast_to(np.asarray(noise, dtype=float), (m,)).copy()
        if np.any(self.noise < 0):
            raise ValueError("noise variances must be nonnegative")
        self.labels = tuple(labels) if labels is not None else tuple(str(k) for k in range(m))
        for arr in (self.prior, self.posterior, self.noise):
            arr.setflags(write=False)
        self._logdet = lru_cache(maxsize=cache_size)(self._logdet_uncached)

    @classmethod
    def from_joint(
        cls,
        jg: JointGaussian,
        sensing: Sequence[str] | None = None,
        targets: Sequence[str] | None = None,
        noise: NoiseModel | None = None,
        **kwargs,
    ) -> "GaussianEngine":
        sensing = list(jg.vars.sensing if sensing is None else sensing)
        targets = list(jg.vars.targets if targets is None else targets)
        prior = jg.block(sensing)
        posterior = condition(jg, sensing, targets) if targets else prior
        r = np.zeros(len(sensing)) if noise is None else noise.diag(sensing, jg.vars)
        return cls(prior, posterior, r, labels=sensing, **kwargs)

    @property
    def n_points(self) -> int:
        return self.prior.shape[0]

    def _logdet_uncached(self, idx: tuple[int, ...], posterior: bool) -> float:
        if not idx:
            return 0.0
        ix = np.asarray(idx, dtype=int)
        base = self.posterior if posterior else self.prior
        block = base.take(ix, axis=0).take(ix, axis=1)
        block.flat[:: ix.size + 1] += self.noise[ix]
        # the stored matrices are exactly symmetric, so factor the scratch block in
        # place; only the diagonal of the factor is read
        chol, info = dpotrf(block, lower=1, clean=0, overwrite_a=1)
        if info != 0:
            block = base.take(ix, axis=0).take(ix, axis=1)
            block.flat[:: ix.size + 1] += self.noise[ix]
            chol = _cholesky(block)
        return 2.0 * float(np.log(chol.diagonal()).sum())

    def logdet(self, idx: Iterable[int], posterior: bool = False) -> float:
        """log|P(z_idx)|, or log|P(z_idx | x_t)| when `posterior`."""
        return self._logdet(tuple(sorted(int(k) for k in idx)), posterior)

    def cond_logdet(self, a: Sequence[int], c: Sequence[int] = (), posterior: bool = False) -> float:
        """log|P(z_a | z_c [, x_t])| as log|P(z_{a+c})| - log|P(z_c)|."""
        a, c = tuple(a), tuple(c)
        if not a:
            return 0.0
        return self.logdet(a + c, posterior) - self.logdet(c, posterior)

    def entropy(self, a: Sequence[int], c: Sequence[int] = (), given_target: bool = False) -> float:
        """H(z_a | z_c) or H(z_a | z_c, x_t)."""
        return 0.5 * len(a) * LOG_2PIE + 0.5 * self.cond_logdet(a, c, given_target)

    def mi(self, a: Sequence[int], c: Sequence[int] = ()) -> float:
        """I(x_t; z_a | z_c) by the backward scheme."""
        if not len(a):
            return 0.0
        return 0.5 * (self.cond_logdet(a, c, False) - self.cond_logdet(a, c, True))

    def zz_mi(
        self,
        a: Sequence[int],
        b: Sequence[int],
        c: Sequence[int] = (),
        given_target: bool = False,
    ) -> float:
        """I(z_a; z_b | z_c [, x_t]) between two measurement selections."""
        a, b, c = tuple(a), tuple(b), tuple(c)
        if not a or not b:
            return 0.0
        return 0.5 * (
            self.cond_logdet(a, c, given_target) - self.cond_logdet(a, b + c, given_target)
        )

    def z_covariances(self) -> tuple[np.ndarray, np.ndarray]:
        """(P(z_S), P(z_S | x_t)) over every candidate point."""
        r = np.diag(self.noise)
        return self.prior + r, self.posterior + r

    def cache_info(self):
        return self._logdet.cache_info()

    def cache_clear(self) -> None:
        self._logdet.cache_clear()
