"""Bounded metric distortion and entropy-constrained quantizer design.

The second-stage block codes are realized by Lagrangian Lloyd descent:
assignment minimizes distortion + lambda * length / n, centroids are updated
under the clipped metric (with a guard so the training Lagrangian never
increases), and real-valued codeword lengths track the empirical usage.
After convergence the lengths are rounded to an integer prefix code by the
canonical-Kraft procedure, and the normalized-length cap 2*rho_max/lambda is
enforced constructively.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .bitcode import BitReader, BitString, TruncatedStreamError
from .models import SampleBlock, SourceFamily
from .rand import TAG_EVAL, rng_for


@dataclass(frozen=True)
class DistortionSpec:
    """Per-letter distortion min(base distance, rho_max); the base metric is
    the absolute difference on R (or the Euclidean norm on R^d)."""

    rho_max: float = 1.0
    base: str = "absolute-difference"  # or "euclidean"

    def __post_init__(self):
        if self.rho_max <= 0:
            raise ValueError("rho_max must be > 0")
        if self.base not in ("absolute-difference", "euclidean"):
            raise ValueError(f"unknown base metric {self.base!r}")


@dataclass(frozen=True)
class LagrangianReport:
    distortion: float
    rate: float              # bits per source letter
    lagrangian: float
    lam: float
    distortion_se: float = 0.0
    rate_se: float = 0.0

    def __post_init__(self):
        expected = self.distortion + self.lam * self.rate
        if abs(self.lagrangian - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("lagrangian must equal distortion + lambda * rate")

    @classmethod
    def build(cls, distortion, rate, lam, distortion_se=0.0, rate_se=0.0):
        return cls(distortion=float(distortion), rate=float(rate),
                   lagrangian=float(distortion) + float(lam) * float(rate),
                   lam=float(lam), distortion_se=float(distortion_se),
                   rate_se=float(rate_se))


def _block_array(x) -> np.ndarray:
    if isinstance(x, SampleBlock):
        return x.values
    return np.asarray(x, dtype=float)


def rho_n(spec: DistortionSpec, x, xhat) -> float:
    """Per-letter average of the clipped base metric; lies in [0, rho_max]."""
    a = _block_array(x)
    b = _block_array(xhat)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        d = np.abs(a - b)
    else:
        d = np.linalg.norm(a - b, axis=-1)
    return float(np.mean(np.minimum(d, spec.rho_max)))


def pairwise_distortion(blocks: np.ndarray, codevectors: np.ndarray,
                        spec: DistortionSpec) -> np.ndarray:
    """rho_n between every block and every codevector, shape (T, K)."""
    X = np.asarray(blocks, dtype=float)
    C = np.asarray(codevectors, dtype=float)
    T, K = X.shape[0], C.shape[0]
    n = X.shape[1]
    out = np.empty((T, K))
    # chunk over blocks to keep the broadcast buffer modest
    step = max(1, int(2e7 // max(1, K * n)))
    for lo in range(0, T, step):
        hi = min(T, lo + step)
        diff = X[lo:hi, None, ...] - C[None, :, ...]
        if X.ndim == 2:
            d = np.abs(diff)
        else:
            d = np.linalg.norm(diff, axis=-1)
        out[lo:hi] = np.mean(np.minimum(d, spec.rho_max), axis=-1)
    return out


def canonical_code(lengths) -> list[BitString]:
    """Canonical prefix code for integer lengths satisfying Kraft."""
    lengths = [int(L) for L in lengths]
    if sum(2.0 ** -L for L in lengths) > 1.0 + 1e-12:
        raise ValueError("lengths violate the Kraft inequality")
    order = sorted(range(len(lengths)), key=lambda j: (lengths[j], j))
    codes: list[BitString | None] = [None] * len(lengths)
    code_val = 0
    prev_len = lengths[order[0]] if order else 0
    for rank, j in enumerate(order):
        L = lengths[j]
        if rank > 0:
            code_val = (code_val + 1) << (L - prev_len)
        prev_len = L
        bits = [(code_val >> (L - 1 - k)) & 1 for k in range(L)]
        codes[j] = BitString(bits)
    return codes


@dataclass(frozen=True)
class Codebook:
    """A designed n-block quantizer: codevectors, integer per-codeword bit
    lengths and the matching canonical prefix code."""

    n: int
    codevectors: np.ndarray           # (K, n) or (K, n, d)
    lengths: np.ndarray               # (K,) integer bit counts
    codes: tuple                      # K BitStrings, prefix-free
    lam: float
    spec: DistortionSpec
    training_lagrangians: tuple = field(default=(), compare=False)

    def __post_init__(self):
        K = self.codevectors.shape[0]
        if len(self.lengths) != K or len(self.codes) != K:
            raise ValueError("inconsistent codebook arrays")
        if self.kraft_sum() > 1.0 + 1e-12:
            raise ValueError("Kraft inequality violated")

    @property
    def size(self) -> int:
        return self.codevectors.shape[0]

    def kraft_sum(self) -> float:
        return float(np.sum(2.0 ** -np.asarray(self.lengths, dtype=float)))

    def max_normalized_length(self) -> float:
        return float(np.max(self.lengths) / self.n)

    def encode_many(self, blocks: np.ndarray) -> np.ndarray:
        """Lagrangian-nearest indices for an array of blocks (tie -> lowest)."""
        cost = pairwise_distortion(blocks, self.codevectors, self.spec)
        cost = cost + self.lam * np.asarray(self.lengths) / self.n
        return np.argmin(cost, axis=1)

    def to_bytes(self) -> bytes:
        """Versioned debug serialization: n, count, float64 vectors, u16 lengths."""
        C = np.asarray(self.codevectors, dtype="<f8")
        d = 1 if C.ndim == 2 else C.shape[2]
        head = struct.pack("<4sBIII", b"ECVQ", 1, self.n, self.size, d)
        return (head + struct.pack("<d", self.lam)
                + struct.pack("<d", self.spec.rho_max)
                + C.tobytes()
                + np.asarray(self.lengths, dtype="<u2").tobytes())

    @classmethod
    def from_bytes(cls, data: bytes, base: str = "absolute-difference") -> "Codebook":
        magic, version, n, K, d = struct.unpack_from("<4sBIII", data, 0)
        if magic != b"ECVQ" or version != 1:
            raise ValueError("not a version-1 codebook blob")
        off = struct.calcsize("<4sBIII")
        lam, rho_max = struct.unpack_from("<dd", data, off)
        off += 16
        count = K * n * d
        C = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        C = C.reshape((K, n) if d == 1 else (K, n, d)).copy()
        off += count * 8
        lengths = np.frombuffer(data, dtype="<u2", count=K, offset=off).astype(int)
        spec = DistortionSpec(rho_max=rho_max, base=base)
        return cls(n=n, codevectors=C, lengths=lengths,
                   codes=tuple(canonical_code(lengths)), lam=lam, spec=spec)


def _cell_centroid(cell: np.ndarray, old: np.ndarray, spec: DistortionSpec):
    """Median under the clipped absolute metric, mean when the cap never
    binds in the cell; only accepted if it does not raise the cell cost."""
    if cell.ndim == 2:
        clipped = np.any(np.abs(cell - old[None, :]) >= spec.rho_max)
        cand = (np.median(cell, axis=0) if clipped else np.mean(cell, axis=0))
        old_cost = np.mean(np.minimum(np.abs(cell - old[None, :]), spec.rho_max))
        new_cost = np.mean(np.minimum(np.abs(cell - cand[None, :]), spec.rho_max))
    else:
        cand = np.mean(cell, axis=0)
        old_cost = np.mean(np.minimum(
            np.linalg.norm(cell - old[None, ...], axis=-1), spec.rho_max))
        new_cost = np.mean(np.minimum(
            np.linalg.norm(cell - cand[None, ...], axis=-1), spec.rho_max))
    return cand if new_cost <= old_cost else old


def _round_lengths(usage: np.ndarray, cap_bits: int) -> np.ndarray:
    """Integer lengths ceil(-log2 p), capped, with a Kraft fix-up that never
    exceeds the cap (feasible because the codebook size is pre-trimmed)."""
    p = usage / usage.sum()
    L = np.ceil(-np.log2(p)).astype(int)
    L = np.minimum(np.maximum(L, 0), cap_bits)
    while np.sum(2.0 ** -L.astype(float)) > 1.0 + 1e-12:
        grow = np.flatnonzero(L < cap_bits)
        if grow.size == 0:
            raise RuntimeError("cannot satisfy Kraft under the length cap")
        j = grow[np.argmin(L[grow])]
        L[j] += 1
    return L


def ecvq_design(training, lam: float, initial_size: int, spec: DistortionSpec,
                seed: int, tolerance: float = 1e-6,
                max_iter: int = 200, restarts: int = 1) -> Codebook:
    """Entropy-constrained Lloyd descent on training blocks.

    The training Lagrangian (real-valued lengths) is non-increasing across
    iterations; the returned codebook carries integer canonical-code lengths
    satisfying Kraft and the 2*rho_max/lambda normalized-length cap.  With
    restarts > 1, Lloyd runs from several seeded initializations and the
    book with the lowest training Lagrangian wins (deterministic in seed).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if initial_size < 1:
        raise ValueError("initial_size must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if isinstance(training, np.ndarray):
        X = np.asarray(training, dtype=float)
    else:
        X = np.stack([_block_array(b) for b in training])
    if X.shape[0] == 0:
        raise ValueError("training set is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("training blocks contain non-finite values")
    best = best_J = None
    for r in range(restarts):
        book = _design_once(X, lam, initial_size, spec, seed + 1_000_003 * r,
                            tolerance, max_iter)
        J = _training_lagrangian(book, X, lam, spec)
        if best is None or J < best_J:
            best, best_J = book, J
    return best


def _training_lagrangian(book: Codebook, X: np.ndarray, lam: float,
                         spec: DistortionSpec) -> float:
    cost = pairwise_distortion(X, book.codevectors, spec) \
        + lam * np.asarray(book.lengths)[None, :] / book.n
    return float(np.mean(np.min(cost, axis=1)))


def _design_once(X: np.ndarray, lam: float, initial_size: int,
                 spec: DistortionSpec, seed: int, tolerance: float,
                 max_iter: int) -> Codebook:
    T, n = X.shape[0], X.shape[1]

    rng = rng_for(seed, 0)
    distinct = np.unique(X.reshape(T, -1), axis=0).reshape((-1,) + X.shape[1:])
    K = min(initial_size, distinct.shape[0])
    pick = rng.choice(distinct.shape[0], size=K, replace=False)
    C = distinct[pick].copy()
    lengths = np.full(K, np.log2(K) if K > 1 else 0.0)

    history = []
    prev_J = np.inf
    for _ in range(max_iter):
        cost = pairwise_distortion(X, C, spec) + lam * lengths[None, :] / n
        assign = np.argmin(cost, axis=1)
        # prune unused codevectors
        used, assign = np.unique(assign, return_inverse=True)
        C = C[used]
        lengths = lengths[used]
        counts = np.bincount(assign, minlength=C.shape[0]).astype(float)
        # centroid step (guarded: never raises the cell cost)
        for j in range(C.shape[0]):
            cell = X[assign == j]
            if cell.shape[0]:
                C[j] = _cell_centroid(cell, C[j], spec)
        # length step: ideal lengths from empirical usage
        lengths = -np.log2(counts / T)
        dist = pairwise_distortion(X, C, spec)
        J = float(np.mean(dist[np.arange(T), assign]
                          + lam * lengths[assign] / n))
        history.append(J)
        if prev_J - J < tolerance:
            break
        prev_J = J

    # integer rounding under the Step-5 cap (uncapped in the lambda=0 limit)
    cap_bits = 62 if lam == 0 else min(62, int(np.floor(2.0 * spec.rho_max * n / lam)))
    max_size = 2 ** cap_bits if cap_bits < 60 else C.shape[0]
    if C.shape[0] > max_size:
        counts = np.bincount(assign, minlength=C.shape[0]).astype(float)
        keep = np.sort(np.argsort(-counts, kind="stable")[:max_size])
        C = C[keep]
        cost = pairwise_distortion(X, C, spec)
        assign = np.argmin(cost, axis=1)
        used, assign = np.unique(assign, return_inverse=True)
        C = C[used]
    counts = np.bincount(assign, minlength=C.shape[0]).astype(float)
    int_lengths = _round_lengths(counts, cap_bits)
    codes = canonical_code(int_lengths)
    return Codebook(n=n, codevectors=C, lengths=int_lengths,
                    codes=tuple(codes), lam=lam, spec=spec,
                    training_lagrangians=tuple(history))


def ecvq_encode(book: Codebook, x, lam: float | None = None,
                spec: DistortionSpec | None = None) -> tuple[int, BitString]:
    """Lagrangian-nearest codeword for one block; ties break to the lowest
    index; returns (index, codeword bits)."""
    lam = book.lam if lam is None else lam
    spec = book.spec if spec is None else spec
    xa = _block_array(x)
    if xa.shape[0] != book.n:
        raise ValueError(f"block length {xa.shape[0]} != codebook n {book.n}")
    cost = pairwise_distortion(xa[None, ...], book.codevectors, spec)[0]
    cost = cost + lam * np.asarray(book.lengths) / book.n
    idx = int(np.argmin(cost))
    return idx, book.codes[idx]


def ecvq_decode_index(book: Codebook, reader: BitReader) -> int:
    """Read one codeword off the stream; atomic (raises on truncation)."""
    table = {bs.bits: j for j, bs in enumerate(book.codes)}
    # zero-length code: single-codeword book consumes no bits
    if () in table and book.size == 1:
        return table[()]
    acc = []
    max_len = int(np.max(book.lengths))
    while len(acc) <= max_len:
        acc.append(reader.read_bit())
        j = table.get(tuple(acc))
        if j is not None:
            return j
    raise TruncatedStreamError("bits do not prefix any codeword")


def lagrangian_eval(book: Codebook, family: SourceFamily, theta,
                    lam: float, spec: DistortionSpec, num_blocks: int,
                    seed: int) -> LagrangianReport:
    """Monte-Carlo Lagrangian of a codebook on fresh blocks from P_theta."""
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    family.validate(theta)
    rng = rng_for(seed, TAG_EVAL)
    X = family.sample_paths(theta, book.n, num_blocks, rng)
    idx = book.encode_many(X)
    dists = pairwise_distortion(X, book.codevectors, spec)
    d_vals = dists[np.arange(num_blocks), idx]
    r_vals = np.asarray(book.lengths)[idx] / book.n
    d_se = float(np.std(d_vals, ddof=1) / np.sqrt(num_blocks)) if num_blocks > 1 else 0.0
    r_se = float(np.std(r_vals, ddof=1) / np.sqrt(num_blocks)) if num_blocks > 1 else 0.0
    return LagrangianReport.build(np.mean(d_vals), np.mean(r_vals), lam,
                                  distortion_se=d_se, rate_se=r_se)
