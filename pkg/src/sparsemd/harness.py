"""Scenario execution, sweeps, CSV emission, and the verify suites.

Config files are INI-style: flat key=value lines under [section] headers
([instance], [scenario], [protocol], [grid]).  Trials are embarrassingly
parallel; the worker count comes from the SPARSEMD_WORKERS environment
variable (default: all cores) and output ordering is by trial id
regardless of completion order.
"""

import concurrent.futures
import configparser
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import datagen, mirror, protocols, sparsify
from . import rng as rngmod
from .errors import InvalidConfigError
from .losses import LinkFunction, loss, subgradient
from .vecspace import lp_norm, svd

_ALGORITHMS = ("smd", "fast_smd", "jl_ogd", "schatten_smd", "centralized",
               "truncation")

CSV_COLUMNS = ("trial", "n_total", "m", "q", "s", "s0", "excess_risk",
               "total_bits", "max_machine_bits", "wall_time")


@dataclass
class Scenario:
    instance: dict               # generator kind plus its arguments
    algorithm: str
    overrides: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    out: str = None

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise InvalidConfigError(
                f"unknown algorithm {self.algorithm!r}; "
                f"choose one of {_ALGORITHMS}")
        if self.trials < 1:
            raise InvalidConfigError("trials must be >= 1")
        kind = self.instance.get("kind")
        if kind is None:
            raise InvalidConfigError("instance spec needs a 'kind' field")
        is_matrix = kind == "matrix_s1sq"
        if is_matrix != (self.algorithm == "schatten_smd"):
            raise InvalidConfigError(
                "matrix instances pair with schatten_smd and vector "
                f"instances with the other algorithms (got {kind!r} with "
                f"{self.algorithm!r})")


@dataclass
class TrialRecord:
    trial: int
    n_total: int
    m: int
    q: float
    s: int
    s0: int
    excess_risk: float
    total_bits: int
    max_machine_bits: int
    wall_time: float


_GENERATORS = {
    "l1lq": datagen.gen_l1lq,
    "l2l2": datagen.gen_l2l2,
    "sparse_regression": datagen.gen_sparse_regression,
    "hide_and_seek": datagen.gen_hide_and_seek,
    "matrix_s1sq": datagen.gen_matrix_s1sq,
}

_INSTANCE_CACHE = {}


def build_instance(spec, seed):
    """Instantiate (and per-process cache) a generator from its spec dict."""
    kind = spec.get("kind")
    if kind not in _GENERATORS:
        raise InvalidConfigError(f"unknown instance kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    kwargs.setdefault("seed", seed)
    key = (kind, tuple(sorted(kwargs.items())))
    if key not in _INSTANCE_CACHE:
        try:
            _INSTANCE_CACHE[key] = _GENERATORS[kind](**kwargs)
        except TypeError as exc:
            raise InvalidConfigError(
                f"bad arguments for instance kind {kind!r}: {exc}") from exc
    return _INSTANCE_CACHE[key]


def _protocol_config(inst, ov):
    n_total = int(ov.get("n_total", 1024))
    m = int(ov.get("m", 1))
    kappa_s = float(ov.get("kappa_s", 1.0))
    kappa_s0 = float(ov.get("kappa_s0", 1.0))
    r_q = float(ov.get("r_q", inst.grad_bound))
    cfg = protocols.default_params_lipschitz(
        d=inst.dim, b1=float(ov.get("b1", inst.b1)), r_q=r_q,
        q=float(ov.get("q", inst.q)),
        n_total=n_total, m=m, kappa_s=kappa_s, kappa_s0=kappa_s0,
        linear_model=bool(ov.get("linear_model", True)),
        high_prob=bool(ov.get("high_prob", False)))
    for name in ("eta", "s", "s0"):
        if name in ov:
            setattr(cfg, name, type(getattr(cfg, name))(ov[name]))
    if ov.get("smooth_params") and inst.l_star is not None:
        beta_q = inst.link.smoothness * r_q ** 2
        l_star = max(float(inst.l_star), 1e-12)
        cfg.eta, cfg.s0 = protocols.default_params_smooth(
            cfg.b1, beta_q, inst.q, n_total, l_star)
    return cfg


def run_trial(sc, trial_id):
    """One seeded trial; returns a TrialRecord."""
    inst = build_instance(sc.instance, sc.seed)
    ov = sc.overrides
    rng = rngmod.stream(sc.seed, 7, trial_id)
    data = inst.sampler(stream_id=trial_id)
    t0 = time.perf_counter()
    if sc.algorithm == "smd":
        cfg = _protocol_config(inst, ov)
        w_hat, ledger, _ = protocols.run_smd(data, cfg, inst.link, rng)
        s, s0 = cfg.s, cfg.s0 or 0
    elif sc.algorithm == "centralized":
        cfg = _protocol_config(inst, ov)
        cfg.m, cfg.n = 1, cfg.n_total
        w_hat = protocols.run_centralized_md(data, cfg, inst.link)
        ledger = protocols.CommLedger()
        s, s0 = 0, 0
    elif sc.algorithm == "truncation":
        cfg = _protocol_config(inst, ov)
        w_hat, ledger = protocols.run_truncation_baseline(
            data, cfg, inst.link,
            kappa_trunc=float(ov.get("kappa_trunc", 1.0)))
        s, s0 = 0, 0
    elif sc.algorithm == "fast_smd":
        cfg = _protocol_config(inst, ov)
        gamma_q = float(ov.get("gamma_q",
                               inst.gamma / (4.0 * inst.k_sparsity)))
        fcfg = protocols.FastRateConfig(
            gamma_q=gamma_q, c=float(ov.get("c", 1.0)), b1=cfg.b1,
            r_q=float(ov.get("schedule_r", cfg.r_q)), q=cfg.q,
            n_total=cfg.n_total,
            kappa_s=float(ov.get("kappa_s", 1.0)),
            kappa_s0=float(ov.get("kappa_s0", 1.0)),
            absorb_leftover=bool(ov.get("absorb_leftover", False)),
            s_fixed=int(ov["s_fixed"]) if "s_fixed" in ov else None,
            s0_fixed=int(ov["s0_fixed"]) if "s0_fixed" in ov else None)
        w_hat, ledger, _ = protocols.run_fast_smd(data, fcfg, cfg,
                                                  inst.link, rng)
        s, s0 = cfg.s, cfg.s0 or 0
    elif sc.algorithm == "jl_ogd":
        cfg = _protocol_config(inst, ov)
        k = int(ov.get("k", math.ceil(
            cfg.n_total * math.log(inst.dim * cfg.n_total))))
        eta = float(ov.get("eta", (cfg.b1 / cfg.r_q)
                    * math.sqrt(1.0 / cfg.n_total)))
        w_hat, ledger = protocols.run_jl_ogd(data, cfg, k, eta, inst.link,
                                             rng)
        s, s0 = 0, 0
    else:  # schatten_smd
        cfg = _protocol_config(inst, ov)
        w_hat, ledger, _ = protocols.run_schatten_smd(data, cfg, inst.link,
                                                      rng)
        s, s0 = cfg.s, cfg.s0 or 0
    wall = time.perf_counter() - t0
    return TrialRecord(trial=trial_id, n_total=cfg.n_total, m=cfg.m,
                       q=inst.q, s=s, s0=s0,
                       excess_risk=float(inst.excess_risk(w_hat)),
                       total_bits=ledger.total_bits,
                       max_machine_bits=ledger.max_machine_bits,
                       wall_time=wall)


def worker_count():
    raw = os.environ.get("SPARSEMD_WORKERS", "")
    if raw.strip():
        n = int(raw)
        if n < 1:
            raise InvalidConfigError("SPARSEMD_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


def _trial_star(args):
    sc, tid = args
    return run_trial(sc, tid)


def run_scenario(sc, workers=None):
    """Execute all trials (in parallel) and optionally write the CSV."""
    workers = worker_count() if workers is None else workers
    jobs = [(sc, tid) for tid in range(sc.trials)]
    if workers > 1 and sc.trials > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=min(workers, sc.trials)) as pool:
            records = list(pool.map(_trial_star, jobs))
    else:
        records = [run_trial(sc, tid) for tid in range(sc.trials)]
    records.sort(key=lambda r: r.trial)
    if sc.out:
        write_csv(sc.out, records)
    return records


def format_csv(records):
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        vals = asdict(r)
        cells = []
        for col in CSV_COLUMNS:
            v = vals[col]
            cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path, records):
    with open(path, "w") as fh:
        fh.write(format_csv(records))


def sweep(sc, grid, workers=None):
    """Cross product of override values; returns records across the grid.

    grid maps override names (n_total, m, s, s0, ...) to value lists.
    """
    names = sorted(grid)
    combos = [{}]
    for name in names:
        combos = [dict(c, **{name: v}) for c in combos for v in grid[name]]
    records = []
    for combo in combos:
        sub = Scenario(instance=sc.instance, algorithm=sc.algorithm,
                       overrides=dict(sc.overrides, **combo),
                       trials=sc.trials, seed=sc.seed, out=None)
        records.extend(run_scenario(sub, workers=workers))
    if sc.out:
        write_csv(sc.out, records)
    return records


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)),
                            np.log(np.asarray(ys, dtype=float)), 1)[0])


# ---------------------------------------------------------------------------
# hide-and-seek

def budget_to_s(d, budget_bits, mode=sparsify.EncodeMode.RANK,
                s_cap=1 << 20):
    """Largest per-message atom count whose wire cost fits the bit budget.

    Capped at s_cap: for s >> d the multiset code grows only
    logarithmically in s, so an uncapped search returns astronomically
    large counts that add nothing statistically.
    """
    if sparsify.encode_cost(d, 1, mode).total_bits > budget_bits:
        return 1
    lo, hi = 1, 2
    while hi < s_cap and \
            sparsify.encode_cost(d, hi, mode).total_bits <= budget_bits:
        lo, hi = hi, 2 * hi
    hi = min(hi, s_cap)
    if sparsify.encode_cost(d, hi, mode).total_bits <= budget_bits:
        return hi
    while lo < hi - 1:
        mid = (lo + hi) // 2
        if sparsify.encode_cost(d, mid, mode).total_bits <= budget_bits:
            lo = mid
        else:
            hi = mid
    return lo


def hide_and_seek_trial(d, rho, budget_bits, n_total, m, seed, trial_id):
    """One detection trial: SMD under a per-message budget, argmax decision."""
    init = rngmod.stream(seed, 11, trial_id)
    j_star = int(init.integers(d))
    inst = datagen.gen_hide_and_seek(d, rho, j_star, seed + 1000003 * trial_id)
    s = budget_to_s(d, budget_bits)
    cfg = protocols.ProtocolConfig(
        d=d, n_total=n_total, m=m, q=2.0, b1=1.0, r_q=math.sqrt(d),
        eta=math.sqrt(1.0 / n_total), s=s, s0=s)
    rng = rngmod.stream(seed, 7, trial_id)
    w_hat, _, _ = protocols.run_smd(inst.sampler(stream_id=trial_id), cfg,
                                    inst.link, rng)
    return int(np.argmax(w_hat) == j_star)


def _hs_star(args):
    return hide_and_seek_trial(*args)


def hide_and_seek_scenario(d, rho, budgets, trials, seed=0, n_total=4096,
                           m=4, out=None, workers=None):
    """Detection rate of the planted coordinate per communication budget."""
    if not (0.0 <= rho <= 0.5):
        raise InvalidConfigError("rho must lie in [0, 1/2]")
    workers = worker_count() if workers is None else workers
    rows = []
    for budget in budgets:
        jobs = [(d, rho, budget, n_total, m, seed, tid)
                for tid in range(trials)]
        if workers > 1 and trials > 1:
            with concurrent.futures.ProcessPoolExecutor(
                    max_workers=min(workers, trials)) as pool:
                hits = list(pool.map(_hs_star, jobs, chunksize=8))
        else:
            hits = [hide_and_seek_trial(*j) for j in jobs]
        rows.append((rho, budget, trials, sum(hits) / trials))
    text = "rho,budget_bits,trials,detection_rate\n" + "".join(
        f"{r:.17g},{b},{t},{rate:.17g}\n" for r, b, t, rate in rows)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return rows, text


# ---------------------------------------------------------------------------
# config files

def _coerce(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config(path):
    """INI config -> dict of section dicts with coerced scalar values."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise InvalidConfigError(f"config file not found: {path}")
    out = {}
    for section in cp.sections():
        out[section] = {k: _coerce(v) for k, v in cp.items(section)}
    return out


def scenario_from_config(cfg, seed=None, trials=None, out=None):
    if "instance" not in cfg or "scenario" not in cfg:
        raise InvalidConfigError(
            "config needs [instance] and [scenario] sections")
    sc_sec = dict(cfg["scenario"])
    algorithm = sc_sec.pop("algorithm", None)
    if algorithm is None:
        raise InvalidConfigError("[scenario] needs an 'algorithm' field")
    sc = Scenario(instance=dict(cfg["instance"]), algorithm=algorithm,
                  overrides=dict(cfg.get("protocol", {})),
                  trials=int(sc_sec.pop("trials", 1)),
                  seed=int(sc_sec.pop("seed", 0)),
                  out=sc_sec.pop("out", None))
    if seed is not None:
        sc.seed = seed
    if trials is not None:
        sc.trials = trials
    if out is not None:
        sc.out = out
    return sc


def grid_from_config(cfg):
    grid = {}
    for key, val in cfg.get("grid", {}).items():
        parts = [p for p in str(val).split(",") if p.strip()]
        grid[key] = [_coerce(p) for p in parts]
    if not grid:
        raise InvalidConfigError("sweep config needs a [grid] section")
    return grid


# ---------------------------------------------------------------------------
# verify suites

def _verify_mirror(report):
    ok = True
    rng = rngmod.stream(2024, 1)
    for p in (1.25, 1.5, 2.0):
        mmap = mirror.MirrorMap(p=p, center=np.zeros(16))
        ball = mirror.L1Ball(1.0)
        worst_rt, worst_feas, worst_breg = 0.0, 0.0, 0.0
        for _ in range(200):
            w = rng.standard_normal(16)
            back = mirror.inv_grad_reg(mmap, mirror.grad_reg(mmap, w))
            worst_rt = max(worst_rt, float(np.max(np.abs(back - w))))
            theta = mirror.grad_reg(mmap, 3.0 * rng.standard_normal(16))
            proj = mirror.bregman_project(mmap, ball, theta)
            worst_feas = max(worst_feas, lp_norm(proj, 1) - ball.radius)
            worst_breg = max(worst_breg,
                             -mirror.bregman(mmap, w, rng.standard_normal(16)))
        report.append(f"mirror p={p}: dual roundtrip err {worst_rt:.2e}, "
                      f"feasibility slack {worst_feas:.2e}, "
                      f"bregman negativity {worst_breg:.2e}")
        ok &= worst_rt < 1e-8 and worst_feas < 1e-6 and worst_breg < 1e-10
    return ok


def _verify_maurey(report):
    ok = True
    rng = rngmod.stream(2024, 2)
    d = 256
    w = rng.standard_normal(d)
    w /= lp_norm(w, 1)
    for p in (1.25, 1.5, 2.0):
        for s in (16, 64, 256):
            errs = [lp_norm(sparsify.decode(sparsify.maurey(w, s, rng), d)
                            - w, p) for _ in range(400)]
            bound = 4.0 * lp_norm(w, 1) * s ** (-(1.0 - 1.0 / p))
            ratio = float(np.mean(errs)) / bound
            report.append(f"maurey p={p} s={s}: mean err/bound = {ratio:.3f}")
            ok &= ratio < 1.0
    return ok


def _verify_wire(report):
    ok = True
    rng = rngmod.stream(2024, 3)
    for trial in range(200):
        d = int(rng.integers(2, 2000))
        s = int(rng.integers(1, 64))
        w = rng.standard_normal(d)
        msg = sparsify.maurey(w, s, rng)
        for mode in sparsify.EncodeMode:
            blob, cost = sparsify.encode(msg, d, mode)
            back = sparsify.decode_bits(blob, d)
            same = (back.scale == msg.scale and back.s == msg.s
                    and back.as_multiset() == msg.as_multiset())
            ok &= same and len(blob) * 8 - cost.total_bits < 8
    report.append(f"wire: 200 random roundtrips exact = {ok}")
    return ok


def _verify_losses(report):
    ok = True
    rng = rngmod.stream(2024, 4)
    for kind in ("square", "logistic", "hinge", "absolute", "linear"):
        link = LinkFunction(kind)
        worst = 0.0
        for _ in range(300):
            a, b_, y = rng.uniform(-3, 3, size=3)
            mid = 0.5 * (a + b_)
            gap = link.value(mid, y) \
                - 0.5 * (link.value(a, y) + link.value(b_, y))
            worst = max(worst, gap)
        report.append(f"losses {kind}: convexity violation {worst:.2e}")
        ok &= worst <= 1e-12
    return ok


def _verify_datagen(report):
    ok = True
    inst = datagen.gen_l1lq(64, 2.0, 1.0, 1.0, seed=5, link_kind="square")
    gen = inst.sampler()
    worst = 0.0
    for _ in range(2000):
        z = next(gen)
        worst = max(worst, abs(lp_norm(z.x, inst.q) - inst.r_q))
    report.append(f"datagen l1lq: |norm - R_q| max {worst:.2e}")
    ok &= worst < 1e-9
    probe = inst.w_star + 0.05 * np.eye(64)[0]
    zs = inst.examples(20000, stream_id=77)
    mc = float(np.mean([loss(inst.link, probe, z) for z in zs]))
    cf = inst.risk(probe)
    se = float(np.std([loss(inst.link, probe, z) for z in zs])
               / math.sqrt(len(zs)))
    report.append(f"datagen risk: closed form {cf:.5f}, "
                  f"monte-carlo {mc:.5f} (se {se:.2e})")
    ok &= abs(mc - cf) <= 3.0 * se + 1e-9
    return ok


def _verify_protocol(report):
    ok = True
    inst = datagen.gen_l1lq(128, 2.0, 1.0, 1.0, seed=6, link_kind="absolute",
                            active_dim=16)
    cfg = protocols.default_params_lipschitz(
        d=128, b1=1.0, r_q=1.0, q=2.0, n_total=256, m=4, linear_model=True)
    rng = rngmod.stream(6, 7, 0)
    _, ledger, trace = protocols.run_smd(inst.sampler(0), cfg, inst.link,
                                         rng, w_star=inst.w_star)
    margin = protocols.check_regret(trace, cfg)
    feas = trace["iterate_l1_max"] - cfg.b1
    rng2 = rngmod.stream(6, 7, 0)
    _, ledger2, _ = protocols.run_smd(inst.sampler(0), cfg, inst.link,
                                      rng2, w_star=inst.w_star)
    same = ledger.entries == ledger2.entries
    report.append(f"protocol: regret margin {margin:.2e}, feasibility "
                  f"slack {feas:.2e}, ledger reproducible = {same}")
    return ok and margin <= 1e-8 and feas <= 1e-9 and same


_SUITES = {
    "mirror": _verify_mirror,
    "maurey": _verify_maurey,
    "wire": _verify_wire,
    "losses": _verify_losses,
    "datagen": _verify_datagen,
    "protocol": _verify_protocol,
}


def verify(suite):
    """Run one invariant suite (or 'all'); returns (passed, report lines)."""
    if suite == "all":
        names = list(_SUITES)
    elif suite in _SUITES:
        names = [suite]
    else:
        raise InvalidConfigError(
            f"unknown suite {suite!r}; choose from "
            f"{sorted(_SUITES) + ['all']}")
    report = []
    passed = True
    for name in names:
        ok = _SUITES[name](report)
        report.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        passed &= ok
    return passed, report
