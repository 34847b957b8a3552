"""Parametric stationary source families: sampling, exact block log-densities,
and mixing metadata.

Three families are provided:

* ``GaussianIID``   -- theta = (m, sigma), i.i.d. normal letters.
* ``GaussianAR``    -- theta = (a_1, ..., a_p), X_t = -sum a_i X_{t-i} + Y_t
                       with unit-variance Gaussian innovations; paths start
                       exactly stationary (Yule-Walker covariance, no burn-in).
* ``HiddenMarkov``  -- theta = row-major transition matrix of an M-state
                       chain with known Gaussian emission densities; chains
                       start from the stationary distribution.

Densities are with respect to Lebesgue measure and are evaluated in log
space throughout (the HMM via the forward recursion), so underflow cannot
occur.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_discrete_lyapunov
from scipy.special import logsumexp

from .rand import TAG_SAMPLE, rng_for

LOG_2PI = float(np.log(2.0 * np.pi))


class InvalidParameterError(ValueError):
    """Parameter vector lies outside the family's valid region."""


@dataclass(frozen=True)
class SampleBlock:
    """A length-n sample path segment (letters are scalars or R^d points)."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape[0] != self.n:
            raise ValueError(f"block claims n={self.n} but holds {v.shape[0]}")


@dataclass(frozen=True)
class MixingDescriptor:
    """Upper-bound model for the beta-mixing coefficients: 0 for i.i.d.,
    C * gamma^k for exponentially mixing families."""

    kind: str  # "exact-zero" | "exponential"
    C: float = 1.0
    gamma: float = 0.5

    def bound(self, k: int) -> float:
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "exact-zero":
            return 0.0
        return self.C * self.gamma ** k


def as_theta(theta) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1:
        raise InvalidParameterError("parameter vector must be 1-D")
    return arr


class SourceFamily:
    """Interface shared by the three concrete families."""

    tag: str
    k: int                       # parameter dimension
    mixing: MixingDescriptor
    letter_dim: int = 1          # d; letters live in R^d

    def validate(self, theta) -> np.ndarray:
        raise NotImplementedError

    def sample_paths(self, theta, n: int, count: int,
                     rng: np.random.Generator) -> np.ndarray:
        """Stationary paths, shape (count, n) or (count, n, d)."""
        raise NotImplementedError

    def log_density_batch(self, theta, blocks: np.ndarray) -> np.ndarray:
        """log p_theta^n(x^n) for each row of ``blocks``."""
        raise NotImplementedError

    def prior_draw(self, rng: np.random.Generator, prior: dict | None = None) -> np.ndarray:
        """One draw from the database prior W (positive continuous density)."""
        raise NotImplementedError

    def mixing_bound(self, theta, k: int) -> float:
        self.validate(theta)
        return self.mixing.bound(k)


class GaussianIID(SourceFamily):
    """All Gaussian i.i.d. processes, theta = (mean, std), std > 0."""

    tag = "gaussian-iid"
    k = 2

    def __init__(self):
        self.mixing = MixingDescriptor("exact-zero")

    def validate(self, theta) -> np.ndarray:
        t = as_theta(theta)
        if t.shape[0] != 2:
            raise InvalidParameterError(
                f"gaussian-iid needs (m, sigma), got {t.shape[0]} coords")
        if not np.all(np.isfinite(t)):
            raise InvalidParameterError("non-finite parameter")
        if t[1] <= 0:
            raise InvalidParameterError(f"sigma must be > 0, got {t[1]}")
        return t

    def sample_paths(self, theta, n, count, rng):
        m, s = self.validate(theta)
        return m + s * rng.standard_normal((count, n))

    def log_density_batch(self, theta, blocks):
        m, s = self.validate(theta)
        x = np.atleast_2d(np.asarray(blocks, dtype=float))
        n = x.shape[1]
        z = (x - m) / s
        return -0.5 * np.sum(z * z, axis=1) - n * (0.5 * LOG_2PI + np.log(s))

    def prior_draw(self, rng, prior=None):
        prior = prior or {}
        m = rng.normal(prior.get("m_loc", 0.0), prior.get("m_scale", 10.0))
        s = float(np.exp(rng.normal(prior.get("log_sigma_loc", 0.0),
                                    prior.get("log_sigma_scale", 1.0))))
        return np.array([m, s])


class GaussianAR(SourceFamily):
    """Gaussian AR(p): X_t = -sum_{i=1..p} a_i X_{t-i} + Y_t, Y_t ~ N(0,1).

    Valid theta = (a_1,...,a_p) are those with all roots of
    1 + a_1 z + ... + a_p z^p outside the unit circle (exponential mixing).
    """

    tag = "gaussian-ar"

    def __init__(self, p: int, mixing_C: float = 1.0, mixing_gamma: float = 0.9):
        if p < 1:
            raise ValueError("AR order p must be >= 1")
        self.p = p
        self.k = p
        self.mixing = MixingDescriptor("exponential", mixing_C, mixing_gamma)

    def validate(self, theta) -> np.ndarray:
        t = as_theta(theta)
        if t.shape[0] != self.p:
            raise InvalidParameterError(
                f"AR({self.p}) needs {self.p} coefficients, got {t.shape[0]}")
        if not np.all(np.isfinite(t)):
            raise InvalidParameterError("non-finite parameter")
        # roots of A(z) = 1 + a_1 z + ... + a_p z^p, highest power first
        roots = np.roots(np.concatenate((t[::-1], [1.0])))
        if roots.size and np.min(np.abs(roots)) <= 1.0:
            raise InvalidParameterError(
                f"AR polynomial has a root inside the unit circle "
                f"(min |root| = {np.min(np.abs(roots)):.6f})")
        return t

    def _companion(self, a: np.ndarray) -> np.ndarray:
        p = self.p
        F = np.zeros((p, p))
        F[0, :] = -a
        if p > 1:
            F[1:, :-1] = np.eye(p - 1)
        return F

    def stationary_cov(self, theta) -> np.ndarray:
        """Yule-Walker covariance of p consecutive letters."""
        a = self.validate(theta)
        F = self._companion(a)
        E = np.zeros((self.p, self.p))
        E[0, 0] = 1.0
        G = solve_discrete_lyapunov(F, E)
        return 0.5 * (G + G.T)

    def sample_paths(self, theta, n, count, rng):
        a = self.validate(theta)
        p = self.p
        x = np.empty((count, n))
        q = min(p, n)
        G = self.stationary_cov(a)[:q, :q]
        L = cholesky(G, lower=True)
        # state ordering in G is (X_t,...,X_{t-p+1}); reverse to time order
        init = rng.standard_normal((count, q)) @ L.T
        x[:, :q] = init[:, ::-1]
        if n > p:
            noise = rng.standard_normal((count, n - p))
            for t in range(p, n):
                acc = noise[:, t - p].copy()
                for i in range(1, p + 1):
                    acc -= a[i - 1] * x[:, t - i]
                x[:, t] = acc
        return x

    def log_density_batch(self, theta, blocks):
        a = self.validate(theta)
        x = np.atleast_2d(np.asarray(blocks, dtype=float))
        count, n = x.shape
        p = self.p
        q = min(p, n)
        G = self.stationary_cov(a)[:q, :q]
        L = cholesky(G, lower=True)
        head = x[:, :q][:, ::-1]  # match state ordering of G
        z = np.linalg.solve(L, head.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out = -0.5 * np.sum(z * z, axis=1) - 0.5 * (q * LOG_2PI + logdet)
        if n > p:
            resid = x[:, p:].copy()
            for i in range(1, p + 1):
                resid += a[i - 1] * x[:, p - i:n - i]
            out += -0.5 * np.sum(resid * resid, axis=1) - 0.5 * (n - p) * LOG_2PI
        return out

    def prior_draw(self, rng, prior=None):
        prior = prior or {}
        lo = prior.get("low", -1.5)
        hi = prior.get("high", 1.5)
        while True:
            cand = rng.uniform(lo, hi, size=self.p)
            try:
                return self.validate(cand)
            except InvalidParameterError:
                continue


class HiddenMarkov(SourceFamily):
    """M-state stationary Markov chain observed through a known memoryless
    Gaussian channel; theta is the row-major transition matrix with all
    entries > a0 and unit row sums."""

    tag = "hmm"

    def __init__(self, M: int, a0: float,
                 emission_means, emission_stds,
                 mixing_C: float = 1.0, mixing_gamma: float = 0.9):
        if M < 1:
            raise ValueError("M must be >= 1")
        if not 0 <= a0 < 1.0 / M:
            raise ValueError("need 0 <= a0 < 1/M for a nonempty parameter set")
        self.M = M
        self.a0 = float(a0)
        self.k = M * M
        means = np.asarray(emission_means, dtype=float)
        stds = np.asarray(emission_stds, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if stds.ndim == 1:
            stds = stds[:, None]
        if means.shape[0] != M or stds.shape != means.shape:
            raise ValueError("emission arrays must have shape (M,) or (M, d)")
        if np.any(stds <= 0):
            raise ValueError("emission stds must be positive")
        self.means = means
        self.stds = stds
        self.letter_dim = means.shape[1]
        self.mixing = MixingDescriptor("exponential", mixing_C, mixing_gamma)

    def validate(self, theta) -> np.ndarray:
        t = as_theta(theta)
        if t.shape[0] != self.M * self.M:
            raise InvalidParameterError(
                f"hmm needs {self.M * self.M} transition entries, got {t.shape[0]}")
        A = t.reshape(self.M, self.M)
        if not np.all(np.isfinite(A)):
            raise InvalidParameterError("non-finite parameter")
        if np.any(A <= self.a0 - 1e-12):
            raise InvalidParameterError(
                f"all transition probabilities must exceed a0={self.a0}")
        rowsums = A.sum(axis=1)
        if np.any(np.abs(rowsums - 1.0) > 1e-8):
            raise InvalidParameterError(
                f"transition rows must sum to 1, got {rowsums}")
        return t

    def transition_matrix(self, theta) -> np.ndarray:
        return self.validate(theta).reshape(self.M, self.M)

    def stationary_dist(self, theta) -> np.ndarray:
        A = self.transition_matrix(theta)
        w, v = np.linalg.eig(A.T)
        i = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, i])
        pi = np.abs(pi)
        return pi / pi.sum()

    def _emission_logpdf(self, x: np.ndarray) -> np.ndarray:
        """x shape (count, d) -> per-state log densities, shape (count, M)."""
        z = (x[:, None, :] - self.means[None, :, :]) / self.stds[None, :, :]
        return (-0.5 * np.sum(z * z, axis=2)
                - np.sum(np.log(self.stds), axis=1)[None, :]
                - 0.5 * self.letter_dim * LOG_2PI)

    def sample_paths(self, theta, n, count, rng):
        A = self.transition_matrix(theta)
        pi = self.stationary_dist(theta)
        cum_pi = np.cumsum(pi)
        cum_A = np.cumsum(A, axis=1)
        states = np.empty((count, n), dtype=np.int64)
        u = rng.random((count, n))
        states[:, 0] = np.searchsorted(cum_pi, u[:, 0])
        for t in range(1, n):
            rows = cum_A[states[:, t - 1]]
            states[:, t] = (u[:, t][:, None] > rows).sum(axis=1)
        noise = rng.standard_normal((count, n, self.letter_dim))
        x = self.means[states] + self.stds[states] * noise
        if self.letter_dim == 1:
            return x[:, :, 0]
        return x

    def log_density_batch(self, theta, blocks):
        A = self.transition_matrix(theta)
        pi = self.stationary_dist(theta)
        x = np.asarray(blocks, dtype=float)
        if self.letter_dim == 1 and x.ndim == 2:
            x = x[:, :, None]
        elif x.ndim == 2:
            x = x[None, :, :]
        count, n = x.shape[0], x.shape[1]
        logA = np.log(A)
        alpha = np.log(pi)[None, :] + self._emission_logpdf(x[:, 0, :])
        for t in range(1, n):
            trans = logsumexp(alpha[:, :, None] + logA[None, :, :], axis=1)
            alpha = trans + self._emission_logpdf(x[:, t, :])
        return logsumexp(alpha, axis=1).reshape(count)

    def prior_draw(self, rng, prior=None):
        prior = prior or {}
        conc = prior.get("concentration", 1.0)
        while True:
            A = rng.dirichlet(np.full(self.M, conc), size=self.M)
            if np.all(A > self.a0):
                return A.reshape(-1)


def sample_path(family: SourceFamily, theta, length: int, seed: int) -> SampleBlock:
    """One stationary path of ``length`` letters; pure in (family, theta,
    length, seed)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    family.validate(theta)
    rng = rng_for(seed, TAG_SAMPLE)
    values = family.sample_paths(theta, length, 1, rng)[0]
    return SampleBlock(values=values, n=length)


def log_density(family: SourceFamily, theta, block) -> float:
    """Exact natural-log density of the n-dimensional marginal at the block."""
    values = block.values if isinstance(block, SampleBlock) else np.asarray(block)
    if not np.all(np.isfinite(values)):
        raise ValueError("block contains non-finite values")
    return float(family.log_density_batch(theta, values[None, ...])[0])


def mixing_bound(family: SourceFamily, theta, k: int) -> float:
    """Upper bound on the k-th beta-mixing coefficient (0 for i.i.d.)."""
    return family.mixing_bound(theta, k)


def make_family(spec: dict) -> SourceFamily:
    """Build a family from a plain config mapping (see harness docs)."""
    kind = spec.get("kind")
    if kind == "gaussian-iid":
        return GaussianIID()
    if kind == "gaussian-ar":
        return GaussianAR(p=int(spec["p"]),
                          mixing_C=float(spec.get("mixing_C", 1.0)),
                          mixing_gamma=float(spec.get("mixing_gamma", 0.9)))
    if kind == "hmm":
        return HiddenMarkov(M=int(spec["M"]), a0=float(spec["a0"]),
                            emission_means=spec["emission_means"],
                            emission_stds=spec["emission_stds"],
                            mixing_C=float(spec.get("mixing_C", 1.0)),
                            mixing_gamma=float(spec.get("mixing_gamma", 0.9)))
    raise ValueError(f"unknown family kind: {kind!r}")
