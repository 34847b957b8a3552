"""Yatracos classes, empirical suprema, the minimum-distance estimator, and
VC-bound calculators.

The supremum defining the U statistic runs over the finite Yatracos class
induced by ordered pairs of a candidate list; model-side set probabilities
come from seeded, cached Monte-Carlo.  All log-density comparisons happen in
log space, with exact ties excluded from membership.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .models import SampleBlock, SourceFamily
from .rand import TAG_PROB, rng_for


class TooFewCandidatesError(ValueError):
    """The estimator needs at least one candidate, the U statistic two."""


@dataclass(frozen=True)
class YatracosSet:
    """Decision region {x^n : p_theta(x^n) > p_theta'(x^n)} for an ordered
    parameter pair."""

    theta: tuple
    theta_prime: tuple

    @classmethod
    def of(cls, theta, theta_prime) -> "YatracosSet":
        return cls(tuple(np.asarray(theta, dtype=float)),
                   tuple(np.asarray(theta_prime, dtype=float)))


@dataclass(frozen=True)
class VcBoundReport:
    family: str
    n: int
    bound: float
    formula: str


@dataclass(frozen=True)
class CandidateSet:
    """Finite ordered list of valid, distinct parameter vectors."""

    thetas: tuple

    @classmethod
    def build(cls, family: SourceFamily, candidates) -> "CandidateSet":
        seen = set()
        out = []
        for c in candidates:
            t = tuple(family.validate(c))
            if t not in seen:
                seen.add(t)
                out.append(t)
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.thetas)

    def arrays(self) -> list[np.ndarray]:
        return [np.asarray(t) for t in self.thetas]


def _blocks_matrix(blocks) -> np.ndarray:
    if isinstance(blocks, np.ndarray):
        return blocks
    return np.stack([b.values if isinstance(b, SampleBlock) else np.asarray(b)
                     for b in blocks])


def yatracos_member(family: SourceFamily, yset: YatracosSet, block) -> bool:
    """True iff the block's log-density is strictly larger under theta than
    under theta'; exact ties are out by convention."""
    x = _blocks_matrix([block])
    lp = family.log_density_batch(np.asarray(yset.theta), x)[0]
    lq = family.log_density_batch(np.asarray(yset.theta_prime), x)[0]
    return bool(lp > lq)


_prob_cache: dict = {}
_prob_lock = threading.Lock()


def clear_probability_cache() -> None:
    with _prob_lock:
        _prob_cache.clear()
        _model_freq_cache.clear()


def _model_samples(family, theta_ref, n, num_samples, seed):
    rng = rng_for(seed, TAG_PROB)
    return family.sample_paths(np.asarray(theta_ref), n, num_samples, rng)


def set_probability(family: SourceFamily, theta_ref, yset: YatracosSet,
                    n: int, num_samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo P^n_theta_ref(A) with standard error; cached per
    (family, theta_ref, set, n, budget, seed)."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    t_ref = tuple(family.validate(theta_ref))
    key = (family.tag, t_ref, yset.theta, yset.theta_prime, n, num_samples, seed)
    with _prob_lock:
        if key in _prob_cache:
            return _prob_cache[key]
    x = _model_samples(family, t_ref, n, num_samples, seed)
    lp = family.log_density_batch(np.asarray(yset.theta), x)
    lq = family.log_density_batch(np.asarray(yset.theta_prime), x)
    member = lp > lq
    p = float(np.mean(member))
    se = float(np.sqrt(p * (1 - p) / num_samples))
    with _prob_lock:
        _prob_cache[key] = (p, se)
    return p, se


def _membership_tensor(family, candidates: CandidateSet, X: np.ndarray):
    """Log-densities of every candidate on every block, shape (C, B)."""
    return np.stack([family.log_density_batch(np.asarray(t), X)
                     for t in candidates.thetas])


def _pair_frequencies(logdens: np.ndarray) -> np.ndarray:
    """F[a, b] = fraction of columns where candidate a beats candidate b."""
    return np.mean(logdens[:, None, :] > logdens[None, :, :], axis=2)


_model_freq_cache: dict = {}


def _model_pair_frequencies(family, candidates: CandidateSet, theta: tuple,
                            n: int, mc_budget: int, seed: int) -> np.ndarray:
    """Cached MC estimate of P^n_theta(A_ab) for all ordered candidate pairs."""
    key = (family.tag, candidates.thetas, theta, n, mc_budget, seed)
    with _prob_lock:
        cached = _model_freq_cache.get(key)
    if cached is not None:
        return cached
    Y = _model_samples(family, theta, n, mc_budget, seed)
    freq = _pair_frequencies(_membership_tensor(family, candidates, Y))
    with _prob_lock:
        _model_freq_cache[key] = freq
    return freq


def u_statistic_all(family: SourceFamily, blocks, candidates: CandidateSet,
                    mc_budget: int, seed: int) -> np.ndarray:
    """U_theta for every candidate theta at once (shared empirical side).

    U_theta = sup over ordered candidate pairs (a, b) of
    |P^n_theta(A_ab) - empirical frequency of A_ab over the blocks|.
    """
    if len(candidates) < 2:
        raise TooFewCandidatesError("need >= 2 candidates for the Yatracos class")
    X = _blocks_matrix(blocks)
    if X.shape[0] == 0:
        raise ValueError("no estimation blocks")
    n = X.shape[1]
    emp = _pair_frequencies(_membership_tensor(family, candidates, X))
    C = len(candidates)
    mask = ~np.eye(C, dtype=bool)
    out = np.empty(C)
    for i, theta in enumerate(candidates.thetas):
        model = _model_pair_frequencies(family, candidates, theta, n,
                                        mc_budget, seed + i)
        out[i] = np.max(np.abs(model - emp)[mask])
    return out


def u_statistic(family: SourceFamily, theta, blocks, candidates: CandidateSet,
                mc_budget: int, seed: int) -> float:
    """U statistic of a single parameter against the blocks' empirical law."""
    if len(candidates) < 2:
        raise TooFewCandidatesError("need >= 2 candidates for the Yatracos class")
    X = _blocks_matrix(blocks)
    n = X.shape[1]
    emp = _pair_frequencies(_membership_tensor(family, candidates, X))
    Y = _model_samples(family, family.validate(theta), n, mc_budget, seed)
    model = _pair_frequencies(_membership_tensor(family, candidates, Y))
    mask = ~np.eye(len(candidates), dtype=bool)
    return float(np.max(np.abs(model - emp)[mask]))


def mde_estimate(family: SourceFamily, blocks, candidates: CandidateSet,
                 mc_budget: int, seed: int,
                 return_u: bool = False):
    """Devroye-Lugosi minimum-distance pick: the first candidate whose U
    statistic is within 1/n of the minimum (n = block length)."""
    if len(candidates) == 0:
        raise TooFewCandidatesError("candidate set is empty")
    if len(candidates) == 1:
        theta = np.asarray(candidates.thetas[0])
        return (theta, np.zeros(1)) if return_u else theta
    X = _blocks_matrix(blocks)
    n = X.shape[1]
    u = u_statistic_all(family, X, candidates, mc_budget, seed)
    winner = int(np.flatnonzero(u < u.min() + 1.0 / n)[0])
    theta = np.asarray(candidates.thetas[winner])
    return (theta, u) if return_u else theta


def vc_bound(family: SourceFamily, n: int) -> VcBoundReport:
    """VC-dimension bound of the n-block Yatracos class (base-2 logs)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    e = float(np.e)
    if family.tag == "gaussian-iid":
        val = 12.0 * np.log2(12.0 * e)
        formula = "12*log2(12e)"
    elif family.tag == "gaussian-ar":
        p = family.p
        val = (4.0 * p + 4.0) * np.log2(8.0 * e)
        formula = f"(4p+4)*log2(8e), p={p}"
    elif family.tag == "hmm":
        M = family.M
        val = 4.0 * M * M * np.log2(4.0 * e * n)
        formula = f"4M^2*log2(4en), M={M}"
    else:
        raise ValueError(f"no VC formula for family {family.tag!r}")
    return VcBoundReport(family=family.tag, n=n, bound=float(val), formula=formula)


def vc_deviation_bound(n: int, V: float, epsilon: float) -> float:
    """Uniform-deviation tail bound min(1, 8 n^V exp(-n eps^2 / 32))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if V < 2:
        raise ValueError("the VC tail bound requires V >= 2")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    log_bound = np.log(8.0) + V * np.log(n) - n * epsilon ** 2 / 32.0
    return float(min(1.0, np.exp(min(log_bound, 0.0))))


def vc_expectation_bound(n: int, V: float, c: float = 1.0) -> float:
    """Companion expectation bound c * sqrt(V log n / n); c is a knob, not a
    claim."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return float(c * np.sqrt(V * np.log(n) / n))
