"""Experiment orchestration: redundancy and identification experiments with
CSV output, plus the cross-module invariant suite.

Configs are JSON files with an explicit schema_version; identical config and
seed produce byte-identical CSV (the timestamp comment line can be disabled
with "timestamp": false).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import bitcode, distances, ecvq, mde, models, scheme
from .rand import TAG_TRIAL, derive_seed, rng_for

CSV_SCHEMA = "twostage-csv v1"


class ConfigError(ValueError):
    """Experiment config failed to parse or validate."""


@dataclass
class ExperimentConfig:
    family_spec: dict
    theta0: tuple
    n_grid: tuple
    trials: int
    seed: int = 0
    scheme: dict = field(default_factory=dict)
    eval_blocks: int = 2000
    oracle_train_blocks: int = 2048
    identify_mc: int = 4000
    timestamp: bool = False
    plant_theta0: bool = False      # pin theta0 at database index 1
    plant: tuple = ()               # further pinned indices, after theta0
    per_trial_code_seed: bool = False  # fresh codebook training per trial

    def family(self) -> models.SourceFamily:
        return models.make_family(self.family_spec)

    def scheme_config(self, n: int) -> scheme.SchemeConfig:
        kw = dict(self.scheme)
        kw.setdefault("database_seed", self.seed)
        kw.setdefault("code_seed", self.seed + 1)
        if "r" in kw and kw["r"] is None:
            kw["r"] = math.inf
        if "anchors" in kw:
            kw["anchors"] = tuple(tuple(a) for a in kw["anchors"])
        return scheme.SchemeConfig(n=n, **kw)

    def database(self, family) -> scheme.Database:
        planted = (tuple(self.theta0),) if self.plant_theta0 else ()
        planted += tuple(tuple(t) for t in self.plant)
        sc = self.scheme_config(self.n_grid[0])
        return scheme.Database(family=family, seed=sc.database_seed,
                               prior=sc.prior, planted=planted)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return build_config(raw)


def build_config(raw: dict) -> ExperimentConfig:
    if raw.get("schema_version") != 1:
        raise ConfigError("config must declare schema_version: 1")
    try:
        cfg = ExperimentConfig(
            family_spec=raw["family"],
            theta0=tuple(raw["theta0"]),
            n_grid=tuple(int(n) for n in raw["n_grid"]),
            trials=int(raw["trials"]),
            seed=int(raw.get("seed", 0)),
            scheme=dict(raw.get("scheme", {})),
            eval_blocks=int(raw.get("eval_blocks", 2000)),
            oracle_train_blocks=int(raw.get("oracle_train_blocks", 2048)),
            identify_mc=int(raw.get("identify_mc", 4000)),
            timestamp=bool(raw.get("timestamp", False)),
            plant_theta0=bool(raw.get("plant_theta0", False)),
            plant=tuple(tuple(t) for t in raw.get("plant", ())),
            per_trial_code_seed=bool(raw.get("per_trial_code_seed", False)),
        )
    except KeyError as exc:
        raise ConfigError(f"config is missing required key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field invalid: {exc}") from exc
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if list(cfg.n_grid) != sorted(set(cfg.n_grid)) or len(cfg.n_grid) == 0:
        raise ConfigError("n_grid must be non-empty and strictly increasing")
    try:
        fam = cfg.family()
        fam.validate(cfg.theta0)
        cfg.scheme_config(cfg.n_grid[0])
    except Exception as exc:
        raise ConfigError(f"config semantic error: {exc}") from exc
    return cfg


def _open_csv(path: str, header: list[str], timestamp: bool):
    fh = open(path, "w", newline="")
    fh.write(f"# {CSV_SCHEMA}\n")
    if timestamp:
        fh.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
    writer = csv.writer(fh)
    writer.writerow(header)
    return fh, writer


def _x_value(family, n: int) -> float:
    V = mde.vc_bound(family, n).bound
    return math.sqrt(V * math.log(n) / n)


REDUNDANCY_HEADER = [
    "kind", "n", "trial", "lagrangian_star", "lagrangian_oracle", "redundancy",
    "first_stage_bits", "b_flag", "waiting_time", "d_theta0_theta_hat",
    "distortion_se", "rate_se", "x_value", "seed",
]


def _redundancy_trial(cfg: ExperimentConfig, family, db, sc, candidates,
                      oracle_rep, eval_seed, n, trial):
    trial_seed = derive_seed(cfg.seed, TAG_TRIAL, n, trial)
    if cfg.per_trial_code_seed:
        sc = dataclasses.replace(sc, code_seed=derive_seed(trial_seed, 7))
    if oracle_rep is None:
        oracle_book = scheme.provision_codebook(
            _replace_train(sc, cfg.oracle_train_blocks), family,
            np.asarray(cfg.theta0), 0)
        oracle_rep = ecvq.lagrangian_eval(oracle_book, family,
                                          np.asarray(cfg.theta0), sc.lam,
                                          sc.distortion_spec(family),
                                          cfg.eval_blocks, eval_seed)
    history, current = scheme.sample_scene(family, np.asarray(cfg.theta0), sc,
                                           trial_seed)
    enc = scheme.encode_block(sc, db, history, current, candidates=candidates)
    book = scheme.provision_codebook(
        sc, family, np.asarray(enc.theta_hat),
        enc.waiting_time if enc.waiting_time is not None else 1)
    spec = sc.distortion_spec(family)
    rep = ecvq.lagrangian_eval(book, family, np.asarray(cfg.theta0), sc.lam,
                               spec, cfg.eval_blocks, eval_seed)
    first_bits = 1 + len(enc.first_stage.s1)
    l_star = rep.lagrangian + sc.lam * first_bits / n
    d_hat = scheme.identify_report(np.asarray(cfg.theta0),
                                   np.asarray(enc.theta_hat), family, n,
                                   cfg.identify_mc,
                                   derive_seed(trial_seed, TAG_TRIAL))
    return {
        "n": n, "trial": trial, "lagrangian_star": l_star,
        "lagrangian_oracle": oracle_rep.lagrangian,
        "redundancy": l_star - oracle_rep.lagrangian,
        "first_stage_bits": first_bits, "b_flag": enc.first_stage.b,
        "waiting_time": enc.waiting_time if enc.waiting_time is not None else -1,
        "d_theta0_theta_hat": d_hat,
        "distortion_se": rep.distortion_se, "rate_se": rep.rate_se,
        "x_value": _x_value(family, n), "seed": trial_seed,
        "theta_tilde": enc.theta_tilde, "theta_hat": enc.theta_hat,
        "tol": scheme.waiting_tolerance(sc, family),
    }


def _run_grid(cfg: ExperimentConfig, worker, threads: int):
    """Run worker(n, trial) over the whole grid, deterministic order."""
    jobs = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: worker(*j), jobs))
    else:
        results = [worker(*j) for j in jobs]
    return results


def _fit_slope(xs, ys):
    """Least-squares slope of log(y) on log(x); ignores non-positive y."""
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0]
    if len(pts) < 2:
        return float("nan")
    lx = np.array([p[0] for p in pts])
    ly = np.array([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def run_redundancy_experiment(cfg: ExperimentConfig, out_path: str,
                              threads: int = 1) -> dict:
    """Measure the Lagrangian of the universal code against the oracle
    baseline on a grid of block lengths; returns a summary dict and writes
    one CSV row per trial plus median/slope summary rows."""
    family = cfg.family()
    theta0 = np.asarray(cfg.theta0)
    db = cfg.database(family)
    per_n = {}
    for n in cfg.n_grid:
        sc = cfg.scheme_config(n)
        candidates = scheme.candidate_set(sc, db)
        eval_seed = derive_seed(cfg.seed, TAG_TRIAL, n)
        if cfg.per_trial_code_seed:
            oracle_rep = None   # provisioned inside each trial
        else:
            oracle_cfg = sc if cfg.oracle_train_blocks == sc.train_blocks \
                else _replace_train(sc, cfg.oracle_train_blocks)
            oracle_book = scheme.provision_codebook(oracle_cfg, family,
                                                    theta0, 0)
            oracle_rep = ecvq.lagrangian_eval(oracle_book, family, theta0,
                                              sc.lam,
                                              sc.distortion_spec(family),
                                              cfg.eval_blocks, eval_seed)
        per_n[n] = (sc, candidates, oracle_rep, eval_seed)

    def worker(n, trial):
        sc, candidates, oracle_rep, eval_seed = per_n[n]
        return _redundancy_trial(cfg, family, db, sc, candidates, oracle_rep,
                                 eval_seed, n, trial)

    rows = _run_grid(cfg, worker, threads)
    fh, writer = _open_csv(out_path, REDUNDANCY_HEADER, cfg.timestamp)
    with fh:
        for r in rows:
            writer.writerow(["trial"] + [r[k] for k in REDUNDANCY_HEADER[1:]])
        medians, xs = [], []
        for n in cfg.n_grid:
            reds = [r["redundancy"] for r in rows if r["n"] == n]
            med = float(np.median(reds))
            medians.append(med)
            xs.append(_x_value(family, n))
            writer.writerow(["median", n, "", "", "", med, "", "", "", "",
                             "", "", xs[-1], cfg.seed])
        slope = _fit_slope(xs, medians)
        writer.writerow(["slope", "", "", "", "", slope, "", "", "", "", "",
                         "", "", cfg.seed])
    return {"rows": rows, "medians": dict(zip(cfg.n_grid, medians)),
            "x_values": dict(zip(cfg.n_grid, xs)), "slope": slope}


def _replace_train(sc: scheme.SchemeConfig, train_blocks: int):
    from dataclasses import replace
    return replace(sc, train_blocks=train_blocks)


IDENTIFY_HEADER = [
    "kind", "n", "trial", "d_theta0_theta_hat", "d_theta0_theta_tilde",
    "d_theta_tilde_theta_hat", "tol", "b_flag", "waiting_time",
    "d_se", "x_value", "seed",
]


def run_identification_experiment(cfg: ExperimentConfig, out_path: str,
                                  threads: int = 1) -> dict:
    """Measure d_n(theta0, theta_hat) per trial with its triangle
    decomposition through the MDE output theta_tilde."""
    family = cfg.family()
    theta0 = np.asarray(cfg.theta0)
    db = cfg.database(family)
    per_n = {}
    for n in cfg.n_grid:
        sc = cfg.scheme_config(n)
        per_n[n] = (sc, scheme.candidate_set(sc, db))

    def worker(n, trial):
        sc, candidates = per_n[n]
        trial_seed = derive_seed(cfg.seed, TAG_TRIAL, n, trial)
        if cfg.per_trial_code_seed:
            sc = dataclasses.replace(sc, code_seed=derive_seed(trial_seed, 7))
        history, current = scheme.sample_scene(family, theta0, sc, trial_seed)
        enc = scheme.encode_block(sc, db, history, current,
                                  candidates=candidates)
        tt = np.asarray(enc.theta_tilde)
        th = np.asarray(enc.theta_hat)
        est0h = distances.variational_mc(family, theta0, th, n,
                                         cfg.identify_mc,
                                         derive_seed(trial_seed, 1))
        est0t = distances.variational_mc(family, theta0, tt, n,
                                         cfg.identify_mc,
                                         derive_seed(trial_seed, 2))
        estth = distances.variational_mc(family, tt, th, n, cfg.identify_mc,
                                         derive_seed(trial_seed, 3))
        return {
            "n": n, "trial": trial,
            "d_theta0_theta_hat": est0h.value,
            "d_theta0_theta_tilde": est0t.value,
            "d_theta_tilde_theta_hat": estth.value,
            "tol": scheme.waiting_tolerance(sc, family),
            "b_flag": enc.first_stage.b,
            "waiting_time": enc.waiting_time if enc.waiting_time is not None else -1,
            "d_se": est0h.standard_error + est0t.standard_error + estth.standard_error,
            "x_value": _x_value(family, n), "seed": trial_seed,
        }

    rows = _run_grid(cfg, worker, threads)
    fh, writer = _open_csv(out_path, IDENTIFY_HEADER, cfg.timestamp)
    medians = []
    with fh:
        for r in rows:
            writer.writerow(["trial"] + [r[k] for k in IDENTIFY_HEADER[1:]])
        for n in cfg.n_grid:
            ds = [r["d_theta0_theta_hat"] for r in rows if r["n"] == n]
            med = float(np.median(ds))
            medians.append(med)
            writer.writerow(["median", n, "", med, "", "", "", "", "", "",
                             _x_value(family, n), cfg.seed])
    return {"rows": rows, "medians": dict(zip(cfg.n_grid, medians))}


# ---------------------------------------------------------------------------
# invariant suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, cond, detail) -> CheckResult:
    return CheckResult(name=name, passed=bool(cond), detail=detail)


def run_invariant_suite(seed: int = 20240, corrupt_stream: bool = False) -> list[CheckResult]:
    """Desk-scale executable form of every module's invariants; each entry is
    a named pass/fail with the measured margin.  ``corrupt_stream`` injects a
    negative control into the round-trip check."""
    from scipy.integrate import quad

    out: list[CheckResult] = []
    gauss = models.GaussianIID()

    # 1. Elias round trip
    ok = all(bitcode.elias_decode(bitcode.elias_encode(i))[0] == i
             for i in range(1, 10001))
    out.append(_check("elias-round-trip", ok, "1..10^4 exact"))

    # 2. prefix-freeness by sorting
    words = sorted(str(bitcode.elias_encode(i)) for i in range(1, 4097))
    pf = all(not words[i + 1].startswith(words[i]) for i in range(len(words) - 1))
    out.append(_check("elias-prefix-free", pf, "1..4096 sorted-adjacent"))

    # 3. length law
    ok = all(len(bitcode.elias_encode(i)) == 2 * int(math.log2(i)) + 1
             for i in range(1, 5000))
    out.append(_check("elias-length-law", ok, "2*floor(log2 i)+1"))

    # 4. density normalization (n = 1 Gaussian)
    mass, _ = quad(lambda x: math.exp(models.log_density(gauss, (0.3, 1.7), np.array([x]))),
                   -np.inf, np.inf)
    out.append(_check("gaussian-density-normalization", abs(mass - 1) < 1e-6,
                      f"integral = {mass:.9f}"))

    # 5. AR stationarity: first and last coordinate agree
    ar = models.GaussianAR(p=1)
    X = ar.sample_paths(np.array([-0.5]), 16, 4000, rng_for(seed, 11))
    v0, vn = np.var(X[:, 0]), np.var(X[:, -1])
    se = np.sqrt(2.0 / 4000) * (4.0 / 3.0)
    out.append(_check("ar-stationarity", abs(v0 - vn) < 6 * se,
                      f"var(first)={v0:.4f} var(last)={vn:.4f}"))

    # 6. HMM forward vs brute force
    hmm = models.HiddenMarkov(M=2, a0=0.05, emission_means=[-1.0, 2.0],
                              emission_stds=[0.7, 1.1])
    theta = np.array([0.8, 0.2, 0.3, 0.7])
    x = rng_for(seed, 12).normal(size=4)
    fwd = models.log_density(hmm, theta, x)
    brute = _hmm_brute_force(hmm, theta, x)
    out.append(_check("hmm-forward-brute-force", abs(fwd - brute) < 1e-10,
                      f"|delta| = {abs(fwd - brute):.2e}"))

    # 7. clipped metric: symmetry + triangle on random triples
    spec = ecvq.DistortionSpec(rho_max=1.0)
    rng = rng_for(seed, 13)
    tri_ok = True
    for _ in range(2000):
        a, b, c = rng.normal(scale=2.0, size=(3, 6))
        dab, dba = ecvq.rho_n(spec, a, b), ecvq.rho_n(spec, b, a)
        if abs(dab - dba) > 1e-12 or dab > ecvq.rho_n(spec, a, c) + ecvq.rho_n(spec, c, b) + 1e-12:
            tri_ok = False
            break
    out.append(_check("rho-metric-properties", tri_ok, "2000 random triples"))

    # 8/9. ECVQ Kraft + cap + Lloyd descent
    kraft_ok = cap_ok = mono_ok = True
    for s in range(5):
        Xtr = gauss.sample_paths((0.0, 1.0), 8, 300, rng_for(seed, 14, s))
        book = ecvq.ecvq_design(Xtr, lam=0.4, initial_size=16, spec=spec,
                                seed=seed + s)
        kraft_ok &= book.kraft_sum() <= 1.0 + 1e-12
        cap_ok &= book.max_normalized_length() <= 2 * spec.rho_max / 0.4 + 1e-12
        hist = np.array(book.training_lagrangians)
        mono_ok &= bool(np.all(np.diff(hist) <= 1e-9))
    out.append(_check("ecvq-kraft-inequality", kraft_ok, "5 seeded designs"))
    out.append(_check("ecvq-length-cap", cap_ok, "max len/n <= 2 rho_max/lambda"))
    out.append(_check("ecvq-lloyd-descent", mono_ok, "pre-rounding Lagrangian"))

    # 10. exact-1d vs MC distance
    ex = distances.variational_exact_1d(gauss, (0.0, 1.0), (1.0, 1.0))
    mc = distances.variational_mc(gauss, (0.0, 1.0), (1.0, 1.0), 1, 100_000, seed)
    out.append(_check("distance-exact-vs-mc",
                      abs(ex.value - mc.value) <= 3 * mc.standard_error,
                      f"exact={ex.value:.4f} mc={mc.value:.4f}"))

    # 11. Pinsker chain
    kl = distances.kl_gaussian_iid((0.0, 1.0), (1.0, 1.0))
    out.append(_check("pinsker-chain", ex.value <= math.sqrt(2 * kl) + 1e-9,
                      f"{ex.value:.4f} <= sqrt(2*{kl:.3f})"))

    # 12. smoothness condition (Gaussian closed-form constant)
    rows = distances.smoothness_check(gauss, (0.0, 1.0), [0.05, 0.1], [1, 4, 16],
                                      seed, num_samples=8000)
    out.append(_check("gaussian-smoothness", all(r.passed for r in rows),
                      f"{sum(r.passed for r in rows)}/{len(rows)} grid points"))

    # 13. VC formula values
    v1 = mde.vc_bound(gauss, 4).bound
    v2 = mde.vc_bound(models.GaussianAR(p=2), 4).bound
    v3 = mde.vc_bound(hmm, 8).bound
    ok = (abs(v1 - 12 * math.log2(12 * math.e)) < 1e-9
          and abs(v2 - 12 * math.log2(8 * math.e)) < 1e-9
          and abs(v3 - 16 * math.log2(32 * math.e)) < 1e-9)
    out.append(_check("vc-formula-values", ok,
                      f"{v1:.2f}, {v2:.2f}, {v3:.2f}"))

    # 14. VC deviation vs tail bound on a small grid
    dev_ok = True
    cands = mde.CandidateSet.build(gauss, [(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0),
                                           (0.0, 2.0)])
    for s in range(20):
        Xb = gauss.sample_paths((0.0, 1.0), 1, 2048, rng_for(seed, 15, s))
        emp = mde._pair_frequencies(mde._membership_tensor(gauss, cands, Xb))
        ref = mde._model_pair_frequencies(gauss, cands, (0.0, 1.0), 1,
                                          200_000, seed + 999)
        dev = float(np.max(np.abs(emp - ref)[~np.eye(len(cands), dtype=bool)]))
        eps = 0.6
        if mde.vc_deviation_bound(2048, 2.0, eps) < 1 and dev > eps:
            dev_ok = False
    out.append(_check("vc-uniform-deviation", dev_ok, "20 seeds, eps=0.6"))

    # 15. MDE key inequality audit (small)
    eq2_ok = True
    grid = mde.CandidateSet.build(gauss, [(m, 1.0) for m in np.linspace(-2, 2, 9)]
                                  + [(0.0, 1.0)])
    for s in range(10):
        Z = gauss.sample_paths((0.0, 1.0), 8, 64, rng_for(seed, 16, s))
        theta_t, u = mde.mde_estimate(gauss, Z, grid, 2000, seed + s,
                                      return_u=True)
        i0 = grid.thetas.index((0.0, 1.0))
        d = distances.variational_mc(gauss, (0.0, 1.0), theta_t, 8, 20_000,
                                     seed + 7 * s)
        if d.value > 4 * u[i0] + 3.0 / 8 + 3 * (d.standard_error + 0.02):
            eq2_ok = False
    out.append(_check("mde-distance-inequality", eq2_ok, "10 seeded runs, n=8"))

    # 16/17. two-stage round trip + truncation atomicity
    sc = scheme.SchemeConfig(n=4, lam=0.5, c_delta=1.0, database_seed=seed,
                             code_seed=seed + 1, n_candidates=8,
                             distance_mc=200, mde_mc=500, train_blocks=64,
                             i_max=200)
    db = scheme.Database(family=gauss, seed=seed,
                         prior={"m_scale": 2.0, "log_sigma_scale": 0.5})
    hist, cur = scheme.sample_scene(gauss, (0.0, 1.0), sc, seed + 5)
    enc = scheme.encode_block(sc, db, hist, cur)
    stream = enc.stream()
    if corrupt_stream:
        stream = stream[:max(1, len(stream) - 2)]
    try:
        dec = scheme.decode_block(sc, db, stream)
        rt_ok = (tuple(dec.theta_hat) == enc.theta_hat
                 and dec.bits_consumed == enc.total_bits)
        trunc_raised = False
    except scheme.MalformedStreamError:
        rt_ok = False
        trunc_raised = True
    out.append(_check("two-stage-round-trip", rt_ok and not trunc_raised,
                      f"{enc.total_bits} bits"))
    try:
        scheme.decode_block(sc, db, enc.stream()[:enc.total_bits - 2])
        trunc_ok = False
    except scheme.MalformedStreamError:
        trunc_ok = True
    out.append(_check("truncated-stream-rejected", trunc_ok, "atomic failure"))

    # 18. blocking bound decreases along the Theorem-1 gap schedule
    ar_cfgs = [scheme.SchemeConfig(n=n, lam=0.5, r=2.0) for n in (4, 8, 16)]
    bounds = [scheme.blocking_bound(ar, np.array([-0.5]),
                                    scheme.memory_layout(c)) for c in ar_cfgs]
    out.append(_check("blocking-bound-decreasing",
                      all(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:])),
                      f"{['%.3g' % b for b in bounds]}"))

    return out


def _hmm_brute_force(hmm: models.HiddenMarkov, theta, x: np.ndarray) -> float:
    """Direct sum over all state sequences; oracle for the forward recursion."""
    A = hmm.transition_matrix(theta)
    pi = hmm.stationary_dist(theta)
    xs = np.asarray(x, dtype=float).reshape(-1, hmm.letter_dim)
    n = xs.shape[0]
    emis = np.exp(hmm._emission_logpdf(xs))  # (n, M)
    total = 0.0
    import itertools
    for states in itertools.product(range(hmm.M), repeat=n):
        p = pi[states[0]] * emis[0, states[0]]
        for t in range(1, n):
            p *= A[states[t - 1], states[t]] * emis[t, states[t]]
        total += p
    return math.log(total)


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
