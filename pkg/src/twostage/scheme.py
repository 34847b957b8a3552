"""The two-stage universal code: memory blocking, random parameter database,
waiting-time search, and first/second-stage encoding and decoding.

Encoder and decoder share nothing but the configuration: the database is a
counter-based pseudorandom sequence keyed by (seed, index), and second-stage
codebooks are trained from seeds derived from (code seed, waiting time), so
both ends build identical codebooks without transmitting them.

Wire format per block, bit exact:
    [1 bit flag b][if b=0: Elias-gamma(T)][one second-stage codeword]
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .bitcode import BitReader, BitString, TruncatedStreamError, elias_encode
from .distances import variational_mc
from .ecvq import (Codebook, DistortionSpec, ecvq_design, ecvq_decode_index,
                   ecvq_encode)
from .mde import CandidateSet, mde_estimate, vc_bound
from .models import SampleBlock, SourceFamily
from .rand import TAG_DATABASE, TAG_DISTANCE, TAG_MDE, TAG_SAMPLE, TAG_TRAINING, rng_for
from .rand import derive_seed


class MalformedStreamError(ValueError):
    """Stream does not parse as a whole encoded block."""


@dataclass(frozen=True)
class SchemeConfig:
    """Everything both ends need; nothing else may influence the bitstream."""

    n: int
    lam: float
    eta: float = 1.0
    r: float = math.inf             # mixing exponent; inf for i.i.d.
    delta_mode: str = "practical"   # "practical" | "paper"
    c_delta: float = 1.0
    database_seed: int = 0
    code_seed: int = 0
    i_max: int = 10_000
    n_candidates: int = 64
    anchors: tuple = ()             # extra MDE candidates, tuples of coords
    prior: dict | None = None       # family prior overrides for the database
    rho_max: float = 1.0
    distance_mc: int = 400          # samples per waiting-time distance probe
    mde_mc: int = 2000              # samples per model-side set probability
    train_blocks: int = 256         # codebook training budget
    design_tol: float = 1e-6
    design_restarts: int = 1
    rate_target: float = 1.0        # bits/letter sizing the initial codebook
    max_initial_size: int = 256
    l_cap: int | None = None        # desk-scale clamp on the gap length

    def __post_init__(self):
        if self.n < 1 or self.lam <= 0 or self.i_max < 1 or self.eta <= 0:
            raise ValueError("need n >= 1, lambda > 0, i_max >= 1, eta > 0")
        if self.delta_mode not in ("practical", "paper"):
            raise ValueError(f"unknown delta_mode {self.delta_mode!r}")

    def distortion_spec(self, family: SourceFamily) -> DistortionSpec:
        base = "euclidean" if family.letter_dim > 1 else "absolute-difference"
        return DistortionSpec(rho_max=self.rho_max, base=base)

    def initial_size(self) -> int:
        return int(min(self.max_initial_size,
                       2 ** min(30, math.ceil(self.rate_target * self.n))))


@dataclass(frozen=True)
class MemoryLayout:
    """Tiling of the memory X^0_{-m+1} into n estimation blocks of length n
    interleaved with n gap blocks of length l."""

    n: int
    l_n: int
    m_n: int
    z_offsets: tuple
    y_offsets: tuple
    l_capped: bool = False

    def extract_z(self, history: np.ndarray) -> np.ndarray:
        if history.shape[0] != self.m_n:
            raise ValueError(f"history has {history.shape[0]} letters, need {self.m_n}")
        return np.stack([history[o:o + self.n] for o in self.z_offsets])


def memory_layout(config: SchemeConfig, l_cap: int | None = None) -> MemoryLayout:
    """l_n = ceil(n^((2+eta)/r)), zero when r = inf; m_n = n (n + l_n)."""
    n = config.n
    if math.isinf(config.r):
        l_n = 0
        capped = False
    else:
        l_n = math.ceil(n ** ((2.0 + config.eta) / config.r))
        cap = l_cap if l_cap is not None else config.l_cap
        capped = cap is not None and l_n > cap
        if capped:
            l_n = int(cap)
    m_n = n * (n + l_n)
    stride = n + l_n
    z = tuple(j * stride for j in range(n))
    y = tuple(j * stride + n for j in range(n))
    return MemoryLayout(n=n, l_n=l_n, m_n=m_n, z_offsets=z, y_offsets=y,
                        l_capped=capped)


@dataclass(frozen=True)
class Database:
    """Logically infinite i.i.d. draws from the prior W, random-access by
    index and identical at encoder and decoder.  Indices 1..len(planted) can
    be pinned to explicit parameter values (experiment plumbing)."""

    family: SourceFamily
    seed: int
    prior: dict | None = None
    planted: tuple = ()

    def point(self, i: int) -> np.ndarray:
        if i < 1:
            raise ValueError("database indices start at 1")
        if i <= len(self.planted):
            return self.family.validate(self.planted[i - 1])
        rng = rng_for(self.seed, TAG_DATABASE, i)
        return self.family.prior_draw(rng, self.prior)


@dataclass(frozen=True)
class FirstStageDescription:
    b: int
    s1: BitString

    def __post_init__(self):
        if self.b not in (0, 1):
            raise ValueError("flag must be a bit")
        if (self.b == 1) != (len(self.s1) == 0):
            raise ValueError("b=1 iff s1 is empty")

    def bits(self) -> BitString:
        return BitString([self.b]) + self.s1


@dataclass(frozen=True)
class EncodedBlock:
    first_stage: FirstStageDescription
    s2: BitString
    # encoder-side introspection; never on the wire
    waiting_time: int | None = field(default=None, compare=False)
    theta_tilde: tuple = field(default=(), compare=False)
    theta_hat: tuple = field(default=(), compare=False)
    codeword_index: int = field(default=0, compare=False)

    @property
    def total_bits(self) -> int:
        return 1 + len(self.first_stage.s1) + len(self.s2)

    def stream(self) -> BitString:
        return self.first_stage.bits() + self.s2


@dataclass(frozen=True)
class DecodedBlock:
    xhat: SampleBlock
    theta_hat: np.ndarray
    radius: float          # nan when the first-stage flag was b=1
    bits_consumed: int


def delta_schedule(n: int, V_n: float, mode: str = "practical",
                   c_delta: float = 1.0) -> float:
    """Tolerance schedule delta_n; the waiting-time tolerance is sqrt(n)*delta_n.

    "paper" evaluates sqrt(2048 (V_n + 1) ln n)/n + 6/n^(3/2) (asymptotic
    constants, vacuous at desk scale); "practical" is c * sqrt(ln n / n).
    """
    if n < 2:
        raise ValueError("need n >= 2 for the schedule")
    if mode == "paper":
        return float(np.sqrt(2048.0 * (V_n + 1.0) * np.log(n)) / n
                     + 6.0 / n ** 1.5)
    if mode == "practical":
        return float(c_delta * np.sqrt(np.log(n) / n))
    raise ValueError(f"unknown delta mode {mode!r}")


def waiting_tolerance(config: SchemeConfig, family: SourceFamily) -> float:
    V_n = vc_bound(family, config.n).bound
    return math.sqrt(config.n) * delta_schedule(config.n, V_n,
                                                config.delta_mode,
                                                config.c_delta)


def waiting_time(db: Database, theta_tilde, tol: float, n: int,
                 mc_budget: int, seed: int, i_max: int) -> int | None:
    """First database index whose estimated d_n to theta_tilde is <= tol;
    None is the +infinity marker (i_max exhausted)."""
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    for i in range(1, i_max + 1):
        est = variational_mc(db.family, db.point(i), theta_tilde, n,
                             mc_budget, derive_seed(seed, TAG_DISTANCE, i))
        if est.value <= tol:
            return i
    return None


_book_cache: dict = {}
_book_lock = threading.Lock()


def clear_codebook_cache() -> None:
    with _book_lock:
        _book_cache.clear()


def provision_codebook(config: SchemeConfig, family: SourceFamily,
                       theta_hat, index: int) -> Codebook:
    """Train the second-stage codebook for theta_hat; seeded by
    (code seed, database index) so both ends build the same book."""
    t = tuple(family.validate(theta_hat))
    key = (config.code_seed, config.n, config.lam, config.rho_max,
           config.train_blocks, config.rate_target, config.max_initial_size,
           config.design_restarts, family.tag, t, index)
    with _book_lock:
        book = _book_cache.get(key)
    if book is not None:
        return book
    rng = rng_for(config.code_seed, TAG_TRAINING, index)
    X = family.sample_paths(np.asarray(t), config.n, config.train_blocks, rng)
    book = ecvq_design(X, config.lam, config.initial_size(),
                       config.distortion_spec(family),
                       seed=derive_seed(config.code_seed, TAG_TRAINING, index),
                       tolerance=config.design_tol,
                       restarts=config.design_restarts)
    with _book_lock:
        _book_cache[key] = book
    return book


def candidate_set(config: SchemeConfig, db: Database) -> CandidateSet:
    """First n_candidates database points followed by the config anchors."""
    cands = [db.point(i) for i in range(1, config.n_candidates + 1)]
    cands.extend(np.asarray(a, dtype=float) for a in config.anchors)
    return CandidateSet.build(db.family, cands)


def encode_block(config: SchemeConfig, db: Database, history, current,
                 family: SourceFamily | None = None,
                 candidates: CandidateSet | None = None) -> EncodedBlock:
    """Full first+second stage encoding of one n-block given its memory."""
    family = family or db.family
    layout = memory_layout(config)
    hist = history.values if isinstance(history, SampleBlock) else np.asarray(history)
    cur = current.values if isinstance(current, SampleBlock) else np.asarray(current)
    if cur.shape[0] != config.n:
        raise ValueError(f"current block must have n={config.n} letters")
    Z = layout.extract_z(hist)
    if candidates is None:
        candidates = candidate_set(config, db)
    theta_tilde = mde_estimate(family, Z, candidates, config.mde_mc,
                               derive_seed(config.database_seed, TAG_MDE))
    tol = waiting_tolerance(config, family)
    T = waiting_time(db, theta_tilde, tol, config.n, config.distance_mc,
                     config.code_seed, config.i_max)
    if T is None:
        b, s1, idx_for_book = 1, BitString(), 1
        theta_hat = db.point(1)
    else:
        b, s1, idx_for_book = 0, elias_encode(T), T
        theta_hat = db.point(T)
    book = provision_codebook(config, family, theta_hat, idx_for_book)
    cw_idx, s2 = ecvq_encode(book, cur)
    return EncodedBlock(first_stage=FirstStageDescription(b=b, s1=s1), s2=s2,
                        waiting_time=T, theta_tilde=tuple(theta_tilde),
                        theta_hat=tuple(theta_hat), codeword_index=cw_idx)


def decode_block(config: SchemeConfig, db: Database, stream: BitString,
                 family: SourceFamily | None = None,
                 cursor: int = 0) -> DecodedBlock:
    """Inverse of encode_block; atomic (raises without partial output)."""
    family = family or db.family
    reader = BitReader(stream, cursor)
    try:
        b = reader.read_bit()
        if b == 0:
            T = reader.read_gamma()
            theta_hat = db.point(T)
            idx_for_book = T
            radius = waiting_tolerance(config, family)
        else:
            theta_hat = db.point(1)
            idx_for_book = 1
            radius = float("nan")
        book = provision_codebook(config, family, theta_hat, idx_for_book)
        cw = ecvq_decode_index(book, reader)
    except TruncatedStreamError as exc:
        raise MalformedStreamError(str(exc)) from exc
    xhat = SampleBlock(values=book.codevectors[cw].copy(), n=config.n)
    return DecodedBlock(xhat=xhat, theta_hat=np.asarray(theta_hat),
                        radius=radius, bits_consumed=reader.cursor - cursor)


def identify_report(theta0, theta_hat, family: SourceFamily, n: int,
                    mc_budget: int, seed: int) -> float:
    """Estimated d_n between the true and the decoder-identified marginal."""
    return variational_mc(family, theta0, theta_hat, n, mc_budget, seed).value


def blocking_bound(family: SourceFamily, theta, layout: MemoryLayout) -> float:
    """(n-1) * beta(l_n): the total-variation cost of treating the
    interleaved estimation blocks as i.i.d.; exactly 0 for i.i.d. sources."""
    if layout.l_n == 0:
        return 0.0 if family.mixing.kind == "exact-zero" else \
            (layout.n - 1) * family.mixing_bound(theta, 1)
    return (layout.n - 1) * family.mixing_bound(theta, layout.l_n)


def sample_scene(family: SourceFamily, theta, config: SchemeConfig,
                 seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One contiguous stationary path split into (memory, current block)."""
    layout = memory_layout(config)
    rng = rng_for(seed, TAG_SAMPLE)
    path = family.sample_paths(theta, layout.m_n + config.n, 1, rng)[0]
    return path[:layout.m_n], path[layout.m_n:]
