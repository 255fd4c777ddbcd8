"""Serial multi-machine protocol engine with exact bit accounting.

Machines are simulated one after another.  Every inter-machine transfer
goes through the sparsify wire format (or a metered float channel for the
dense baselines) and is logged in a CommLedger; no unmetered channel
exists in the engine.

Algorithms: sparsified mirror descent, its restarted fast-rate variant,
randomly projected online gradient descent, the Schatten matrix variant,
plus centralized and feature-truncation baselines.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from . import mirror, sparsify
from .errors import InvalidConfigError, InvalidParameterError
from .losses import Example
from .sparsify import EncodeMode
from .vecspace import lp_norm, schatten_norm, svd


@dataclass
class ProtocolConfig:
    d: int
    n_total: int                 # N, total examples across machines
    m: int                       # number of machines
    q: float                     # dual exponent, >= 2
    b1: float                    # l1 constraint radius
    r_q: float                   # gradient lq bound
    eta: float
    s: int                       # atoms per inter-machine message
    s0: Optional[int] = None     # atoms for the output message, None = dense
    high_prob: bool = False      # averaged per-machine output path
    mode: EncodeMode = EncodeMode.RANK
    n: int = field(init=False)   # per-machine examples
    p: float = field(init=False)
    c_q: float = field(init=False)

    def __post_init__(self):
        if self.q < 2:
            raise InvalidConfigError(f"q must be >= 2, got {self.q}")
        if self.m < 1 or self.n_total < 1:
            raise InvalidConfigError("m and N must be positive")
        if self.n_total % self.m != 0:
            raise InvalidConfigError(
                f"N={self.n_total} is not divisible by m={self.m}")
        self.n = self.n_total // self.m
        if self.n < 1:
            raise InvalidConfigError("each machine needs at least one example")
        if self.eta <= 0:
            raise InvalidConfigError("step size eta must be positive")
        if self.s < 1 or (self.s0 is not None and self.s0 < 1):
            raise InvalidConfigError("sample counts s, s0 must be >= 1")
        if self.b1 <= 0 or self.r_q <= 0:
            raise InvalidConfigError("b1 and r_q must be positive")
        self.p = self.q / (self.q - 1.0)
        self.c_q = self.q - 1.0


# messages above this atom count are metered by encode_cost (identical
# bit totals) instead of materializing the multiset-rank integer
_WIRE_S_LIMIT = 512


class CommLedger:
    """Append-only log of every inter-machine transfer, in bits."""

    def __init__(self):
        self.entries = []        # (machine, kind, bits)

    def record(self, machine, kind, bits):
        if bits < 0:
            raise InvalidParameterError("bit count cannot be negative")
        self.entries.append((int(machine), str(kind), int(bits)))

    @property
    def total_bits(self):
        return sum(b for _, _, b in self.entries)

    def machine_bits(self):
        out = {}
        for machine, _, bits in self.entries:
            out[machine] = out.get(machine, 0) + bits
        return out

    @property
    def max_machine_bits(self):
        per = self.machine_bits()
        return max(per.values()) if per else 0

    def to_csv(self, path=None):
        lines = ["machine,kind,bits"]
        lines += [f"{m},{k},{b}" for m, k, b in self.entries]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class FastRateConfig:
    """Restart schedule with geometrically shrinking l1 radius.

    Round k (1-based) gets N_k = C_q * (4 c R / (gamma_q * B_{k-2}))^2
    examples and radius B_{k-1}, where B_j = 2^{-j/2} B_1 and the j = -1
    entry is sqrt(2) * B_1.  T is the largest round count whose schedule
    fits in the N available examples.
    """
    gamma_q: float
    c: float
    b1: float
    r_q: float
    q: float
    n_total: int
    kappa_s: float = 1.0
    kappa_s0: float = 1.0
    absorb_leftover: bool = False   # give unscheduled examples to round T
    s_fixed: Optional[int] = None   # bypass the m^(2(q-1)) message formula
    s0_fixed: Optional[int] = None  # bypass the (N_k/C_q)^(q/2) handoff formula
    radii: list = field(init=False)     # B-bar for rounds 1..T
    counts: list = field(init=False)    # N_k for rounds 1..T
    t_rounds: int = field(init=False)

    def __post_init__(self):
        if self.gamma_q <= 0 or self.c <= 0:
            raise InvalidConfigError("gamma_q and c must be positive")
        if self.q < 2:
            raise InvalidConfigError(f"q must be >= 2, got {self.q}")
        c_q = self.q - 1.0
        radii, counts, used = [], [], 0
        k = 1
        while True:
            b_prev = 2.0 ** (-(k - 2) / 2.0) * self.b1   # B_{k-2}
            n_k = int(math.ceil(
                c_q * (4.0 * self.c * self.r_q / (self.gamma_q * b_prev)) ** 2))
            if used + n_k > self.n_total:
                break
            radii.append(2.0 ** (-(k - 1) / 2.0) * self.b1)  # B_{k-1}
            counts.append(n_k)
            used += n_k
            k += 1
        if not counts:
            raise InvalidConfigError(
                "N too small for a single restart round "
                f"(need {int(math.ceil(c_q * (4 * self.c * self.r_q / (self.gamma_q * math.sqrt(2) * self.b1)) ** 2))}, have {self.n_total})")
        if self.absorb_leftover:
            counts[-1] += self.n_total - used
        self.radii = radii
        self.counts = counts
        self.t_rounds = len(counts)


def default_params_lipschitz(d, b1, r_q, q, n_total, m, kappa_s=1.0,
                             kappa_s0=1.0, linear_model=False,
                             high_prob=False, mode=EncodeMode.RANK):
    """Slow-rate defaults for Lipschitz losses."""
    if q < 2:
        raise InvalidConfigError(f"q must be >= 2, got {q}")
    c_q = q - 1.0
    eta = (b1 / r_q) * math.sqrt(1.0 / (c_q * n_total))
    s = int(math.ceil(kappa_s * m ** (2.0 * (q - 1.0))))
    if linear_model:
        s0 = int(math.ceil(kappa_s0 * n_total))
    else:
        s0 = int(math.ceil(kappa_s0 * n_total ** (q / 2.0)))
    return ProtocolConfig(d=d, n_total=n_total, m=m, q=q, b1=b1, r_q=r_q,
                          eta=eta, s=s, s0=s0, high_prob=high_prob, mode=mode)


def default_params_smooth(b1, beta_q, q, n_total, l_star_est):
    """Small-loss step size and output sample count for smooth losses."""
    if l_star_est <= 0:
        raise InvalidConfigError("l_star_est must be positive")
    if beta_q <= 0:
        raise InvalidConfigError("beta_q must be positive")
    c_q = q - 1.0
    eta = min(math.sqrt(b1 ** 2 / (c_q * beta_q * l_star_est * n_total)),
              1.0 / (4.0 * c_q * beta_q))
    s0 = min(int(math.ceil(math.sqrt(beta_q * b1 ** 2 * n_total
                                     / (c_q * l_star_est)))),
             int(math.ceil(n_total / c_q)))
    return eta, max(s0, 1)


def _example_at(data, i, t):
    """Fetch example for machine i (0-based), local step t (0-based)."""
    if callable(data):
        return data(i, t)
    if hasattr(data, "__next__"):
        return next(data)
    return data[i][t]


def run_smd(data, cfg, link, rng, w_star=None, store_iterates=False):
    """Sparsified mirror descent over serial machines.

    data is an m-list of n-lists of Examples, a callable (i, t) -> Example,
    or an iterator consumed in machine order.  Returns (w_hat, ledger,
    trace); trace carries per-machine regret accounting when w_star is
    given.
    """
    d = cfg.d
    center = np.zeros(d)
    mmap = mirror.MirrorMap(p=cfg.p, center=center)
    ball = mirror.L1Ball(cfg.b1)
    ledger = CommLedger()
    out_flat = int(rng.integers(cfg.n_total))   # uniform pre-update iterate
    out_machine, out_step = divmod(out_flat, cfg.n)
    captured = None
    trace = {"output_index": (out_machine, out_step), "machines": [],
             "iterate_l1_max": 0.0}
    if store_iterates:
        trace["iterates"] = []
    avg_msgs = []                                # high-probability path

    w = center.copy()
    for i in range(cfg.m):
        if i > 0:
            msg = sparsify.maurey(w, cfg.s, rng)
            if cfg.s <= _WIRE_S_LIMIT:
                blob, cost = sparsify.encode(msg, d, cfg.mode)
                ledger.record(i - 1, "iterate", cost.total_bits)
                w = sparsify.decode(sparsify.decode_bits(blob, d), d)
            else:
                # exact cost without materializing the (huge) rank integer
                cost = sparsify.encode_cost(d, cfg.s, cfg.mode,
                                            zero=msg.scale == 0.0)
                ledger.record(i - 1, "iterate", cost.total_bits)
                w = sparsify.decode(msg, d)
        mrec = {"lhs": 0.0, "grad_sq": 0.0, "eta": cfg.eta,
                "breg_initial": None, "breg_final": None}
        if w_star is not None:
            mrec["breg_initial"] = mirror.bregman(mmap, w_star, w)
        run_sum = np.zeros(d) if cfg.high_prob else None
        theta = mirror.grad_reg(mmap, w)
        for t in range(cfg.n):
            trace["iterate_l1_max"] = max(trace["iterate_l1_max"],
                                          lp_norm(w, 1))
            if store_iterates:
                trace["iterates"].append(w.copy())
            if i == out_machine and t == out_step:
                captured = w.copy()
            if cfg.high_prob:
                run_sum += w
            z = _example_at(data, i, t)
            g = link.derivative(float(w @ z.x), z.y) * z.x
            if w_star is not None:
                mrec["lhs"] += float(g @ (w - w_star))
                mrec["grad_sq"] += lp_norm(g, cfg.q) ** 2
            w, theta = mirror.md_step_dual(mmap, ball, theta, g, cfg.eta)
        if w_star is not None:
            mrec["breg_final"] = mirror.bregman(mmap, w_star, w)
        trace["machines"].append(mrec)
        if i == cfg.m - 1:
            trace["final_iterate"] = w
        if cfg.high_prob:
            s_out = cfg.s0 if cfg.s0 is not None else cfg.s
            msg = sparsify.maurey(run_sum / cfg.n, s_out, rng)
            cost = sparsify.encode_cost(d, s_out, cfg.mode,
                                        zero=msg.scale == 0.0)
            ledger.record(i, "avg-output", cost.total_bits)
            avg_msgs.append(msg)

    if cfg.high_prob:
        w_hat = np.mean([sparsify.decode(msg, d) for msg in avg_msgs], axis=0)
    elif cfg.s0 is None:
        w_hat = captured
    else:
        msg = sparsify.maurey(captured, cfg.s0, rng)
        cost = sparsify.encode_cost(d, cfg.s0, cfg.mode,
                                    zero=msg.scale == 0.0)
        ledger.record(cfg.m - 1, "output", cost.total_bits)
        w_hat = sparsify.decode(msg, d)
    return w_hat, ledger, trace


def check_regret(trace, cfg, slack=1e-8):
    """Max violation of the per-machine regret inequality (<= slack passes)."""
    worst = -math.inf
    for mrec in trace["machines"]:
        bound = (cfg.eta * cfg.c_q / 2.0) * mrec["grad_sq"] \
            + (mrec["breg_initial"] - mrec["breg_final"]) / cfg.eta
        worst = max(worst, mrec["lhs"] - bound)
    return worst


def run_centralized_md(data, cfg, link, rng=None, w_star=None):
    """Single-machine mirror descent oracle; no communication, no ledger.

    Mirrors the protocol's output convention: with an rng and high_prob
    off, a uniformly sampled pre-update iterate; otherwise the iterate
    average.
    """
    d = cfg.d
    mmap = mirror.MirrorMap(p=cfg.p, center=np.zeros(d))
    ball = mirror.L1Ball(cfg.b1)
    out_flat = None
    if rng is not None and not cfg.high_prob:
        out_flat = int(rng.integers(cfg.n_total))
    w = np.zeros(d)
    captured = None
    acc = np.zeros(d)
    steps = 0
    theta = mirror.grad_reg(mmap, w)
    for i in range(cfg.m):
        for t in range(cfg.n):
            if steps == out_flat:
                captured = w.copy()
            acc += w
            steps += 1
            z = _example_at(data, i, t)
            g = link.derivative(float(w @ z.x), z.y) * z.x
            w, theta = mirror.md_step_dual(mmap, ball, theta, g, cfg.eta)
    return captured if out_flat is not None else acc / steps


def run_fast_smd(data, fcfg, cfg, link, rng, w_star=None):
    """Restarted sparsified mirror descent (fast rates under RSC).

    Each round runs the slow-rate protocol inside a shrinking l1 ball
    centered on the previous round's sparsified output.  The recentering
    is realized by shifting labels, which requires a residual-form link
    (square or absolute).
    """
    if link.kind not in ("square", "absolute"):
        raise InvalidConfigError(
            "restarted protocol needs a residual-form link (square/absolute)")
    d = cfg.d
    c_q = cfg.c_q
    center = np.zeros(d)
    ledger = CommLedger()
    traces = []
    for k in range(fcfg.t_rounds):
        b_bar = fcfg.radii[k]
        n_k = fcfg.counts[k]
        m_k = min(cfg.m, n_k)
        n_loc = n_k // m_k
        n_used = m_k * n_loc
        eta_k = (b_bar / fcfg.r_q) * math.sqrt(1.0 / (c_q * n_used))
        ratio = cfg.b1 / b_bar
        if fcfg.s_fixed is not None:
            s_k = fcfg.s_fixed
        else:
            s_k = int(math.ceil(fcfg.kappa_s * m_k ** (2.0 * (cfg.q - 1.0))
                                * ratio ** (4.0 * (cfg.q - 1.0))))
        if fcfg.s0_fixed is not None:
            s0_k = fcfg.s0_fixed
        else:
            s0_k = int(math.ceil(fcfg.kappa_s0
                                 * (n_used / c_q) ** (cfg.q / 2.0)
                                 * ratio ** cfg.q))
        sub = ProtocolConfig(d=d, n_total=n_used, m=m_k, q=cfg.q, b1=b_bar,
                             r_q=cfg.r_q, eta=eta_k, s=s_k, s0=None,
                             mode=cfg.mode)

        def shifted(i, t, _c=center):
            z = _example_at(data, i, t)
            return Example(x=z.x, y=z.y - float(_c @ z.x))

        # regret comparator must live in the round's ball; rescale if the
        # recentered optimum falls outside it
        w_shift = None
        if w_star is not None:
            w_shift = w_star - center
            n1 = lp_norm(w_shift, 1)
            if n1 > b_bar:
                w_shift = w_shift * (b_bar / n1)
        _, sub_ledger, sub_trace = run_smd(shifted, sub, link, rng,
                                           w_star=w_shift)
        for machine, kind, bits in sub_ledger.entries:
            ledger.record(machine, f"round{k + 1}-{kind}", bits)
        traces.append(sub_trace)
        # under strong convexity the last iterate is the round's handoff;
        # it is sparsified and metered like any other transfer
        msg = sparsify.maurey(sub_trace["final_iterate"], s0_k, rng)
        cost = sparsify.encode_cost(d, s0_k, cfg.mode,
                                    zero=msg.scale == 0.0)
        ledger.record(m_k - 1, f"round{k + 1}-handoff", cost.total_bits)
        center = center + sparsify.decode(msg, d)
    return center, ledger, traces


def _l2_project(u, radius):
    n = float(np.linalg.norm(u))
    return u if n <= radius else u * (radius / n)


def sparse_jl_matrix(d, k, n_total, seed64):
    """Seeded sparse sign matrix (k x d), column sparsity ceil(log N)."""
    zeta = max(int(math.ceil(math.log(max(n_total, 2)))), 1)
    gen = np.random.Generator(np.random.Philox(key=int(seed64) % 2 ** 64))
    rows = gen.integers(0, k, size=(d, zeta))
    signs = gen.choice([-1.0, 1.0], size=(d, zeta)) / math.sqrt(zeta)
    cols = np.repeat(np.arange(d), zeta)
    return scipy.sparse.csr_matrix(
        (signs.ravel(), (rows.ravel(), cols)), shape=(k, d))


def run_jl_ogd(data, cfg, k, eta, link, rng, identity_debug=False):
    """Projected OGD in a random k-dimensional sketch of the feature space.

    Machine 1 draws a seeded sparse sign matrix A (seed metered at 64
    bits); machines run serial OGD on u with features Ax, handing
    (u, running sum) to the next machine at 64 bits per coordinate.
    Output is A^T times the average iterate.  cfg.b1 is read as the l2
    constraint radius here.
    """
    d = cfg.d
    ledger = CommLedger()
    if identity_debug:
        if k != d:
            raise InvalidConfigError("identity debug mode needs k = d")
        a_mat = None
    else:
        seed64 = int(rng.integers(2 ** 63))
        a_mat = sparse_jl_matrix(d, k, cfg.n_total, seed64)
        ledger.record(0, "jl-seed", 64)
    u = np.zeros(k)
    acc = np.zeros(k)
    steps = 0
    for i in range(cfg.m):
        if i > 0:
            ledger.record(i - 1, "state", 2 * k * 64)
        for t in range(cfg.n):
            acc += u
            steps += 1
            z = _example_at(data, i, t)
            xp = z.x if a_mat is None else a_mat @ z.x
            g = link.derivative(float(u @ xp), z.y) * xp
            u = _l2_project(u - eta * g, cfg.b1)
    u_bar = acc / steps
    w_hat = u_bar if a_mat is None else a_mat.T @ u_bar
    return w_hat, ledger


def run_centralized_ogd(data, cfg, eta, link):
    """Single-machine l2-ball projected OGD oracle; averaged iterates."""
    u = np.zeros(cfg.d)
    acc = np.zeros(cfg.d)
    steps = 0
    for i in range(cfg.m):
        for t in range(cfg.n):
            acc += u
            steps += 1
            z = _example_at(data, i, t)
            g = link.derivative(float(u @ z.x), z.y) * z.x
            u = _l2_project(u - eta * g, cfg.b1)
    return acc / steps


def _spectral_dual(w, p):
    """grad of 0.5*||.||_{S_p}^2 via the singular value decomposition."""
    if p == 2.0:
        return np.array(w, dtype=float, copy=True)
    res = svd(w)
    g = mirror._grad_centered(res.singular_values, p)
    return (res.left_vectors * g) @ res.right_vectors.T


def _spectral_project_dual(theta, p, q, radius):
    """Bregman projection onto the S1 ball: vector projection of the
    dual spectrum inside the singular basis of theta.

    Returns (w, dual_of_w); the projected point shares theta's singular
    basis, so its dual image falls out of the same decomposition and a
    descent loop needs only one SVD per step.
    """
    res = svd(theta)
    sig = mirror._inv_grad_centered(res.singular_values, q)
    if lp_norm(sig, 1) <= radius:
        spec, dual_spec = sig, res.singular_values
    elif p == 2.0:
        spec = mirror._euclidean_l1_project(res.singular_values, radius)
        dual_spec = spec
    else:
        spec, dual_spec = mirror._project_zero_center_dual(
            p, q, radius, res.singular_values)
    w = (res.left_vectors * spec) @ res.right_vectors.T
    dual = (res.left_vectors * dual_spec) @ res.right_vectors.T
    return w, dual


def _spectral_project(theta, p, q, radius):
    return _spectral_project_dual(theta, p, q, radius)[0]


def _spectral_reg(w, p):
    return 0.5 * schatten_norm(w, p) ** 2


def spectral_bregman(w, w2, p):
    """Bregman divergence of 0.5*||.||_{S_p}^2 between matrices."""
    g = _spectral_dual(w2, p)
    return _spectral_reg(w, p) - _spectral_reg(w2, p) \
        - float(np.sum(g * (np.asarray(w, dtype=float) - w2)))


def run_schatten_smd(data, cfg, link, rng, w_star=None):
    """Sparsified mirror descent with the Schatten-p regularizer.

    Iterates are d x d matrices; mirror steps act on the singular value
    spectrum and inter-machine messages are spectral atom lists metered
    at 64 bits per factor entry.
    """
    d = cfg.d
    ledger = CommLedger()
    out_flat = int(rng.integers(cfg.n_total))
    out_machine, out_step = divmod(out_flat, cfg.n)
    captured = None
    trace = {"output_index": (out_machine, out_step)}

    if w_star is not None:
        trace["machines"] = []
    w = np.zeros((d, d))
    for i in range(cfg.m):
        if i > 0:
            msg = sparsify.spectral_maurey(w, cfg.s, rng)
            cost = sparsify.spectral_cost(msg, d)
            ledger.record(i - 1, "iterate", cost.total_bits)
            w = sparsify.decode_spectral(msg, d)
        mrec = None
        if w_star is not None:
            mrec = {"lhs": 0.0, "grad_sq": 0.0, "eta": cfg.eta,
                    "breg_initial": spectral_bregman(w_star, w, cfg.p),
                    "breg_final": None}
        theta_state = _spectral_dual(w, cfg.p)
        for t in range(cfg.n):
            if i == out_machine and t == out_step:
                captured = w.copy()
            z = _example_at(data, i, t)
            g = link.derivative(float(np.sum(w * z.x)), z.y) * z.x
            if mrec is not None:
                mrec["lhs"] += float(np.sum(g * (w - w_star)))
                mrec["grad_sq"] += schatten_norm(g, cfg.q) ** 2
            theta = theta_state - cfg.eta * g
            w, theta_state = _spectral_project_dual(theta, cfg.p, cfg.q,
                                                    cfg.b1)
        if mrec is not None:
            mrec["breg_final"] = spectral_bregman(w_star, w, cfg.p)
            trace["machines"].append(mrec)
    if cfg.s0 is None:
        w_hat = captured
    else:
        msg = sparsify.spectral_maurey(captured, cfg.s0, rng)
        cost = sparsify.spectral_cost(msg, d)
        ledger.record(cfg.m - 1, "output", cost.total_bits)
        w_hat = sparsify.decode_spectral(msg, d)
    return w_hat, ledger, trace


def run_centralized_matrix_md(data, cfg, link):
    """Single-machine Schatten mirror descent oracle; averaged iterates."""
    d = cfg.d
    w = np.zeros((d, d))
    acc = np.zeros((d, d))
    steps = 0
    theta_state = _spectral_dual(w, cfg.p)
    for i in range(cfg.m):
        for t in range(cfg.n):
            acc += w
            steps += 1
            z = _example_at(data, i, t)
            g = link.derivative(float(np.sum(w * z.x)), z.y) * z.x
            theta = theta_state - cfg.eta * g
            w, theta_state = _spectral_project_dual(theta, cfg.p, cfg.q,
                                                    cfg.b1)
    return acc / steps


def truncation_k(cfg, kappa_trunc=1.0):
    return int(math.ceil(kappa_trunc * cfg.n_total ** (cfg.q / 2.0)))


def run_truncation_baseline(data, cfg, link, kappa_trunc=1.0, w_star=None):
    """Centralize top-k_trunc coordinates of every example, then run ERM.

    Each machine keeps the k_trunc largest-magnitude feature coordinates
    per example and ships (index, value) pairs plus the label; the center
    runs single-machine mirror descent on the truncated data.
    """
    d = cfg.d
    k_t = min(truncation_k(cfg, kappa_trunc), d)
    idx_bits = max((d - 1).bit_length(), 1)
    ledger = CommLedger()
    truncated = []
    for i in range(cfg.m):
        rows = []
        for t in range(cfg.n):
            z = _example_at(data, i, t)
            if k_t >= d:
                xt = np.array(z.x, dtype=float, copy=True)
            else:
                keep = np.argpartition(np.abs(z.x), d - k_t)[d - k_t:]
                xt = np.zeros(d)
                xt[keep] = z.x[keep]
            rows.append(Example(x=xt, y=z.y))
        ledger.record(i, "examples",
                      cfg.n * (k_t * (64 + idx_bits) + 64))
        truncated.append(rows)
    w_hat = run_centralized_md(truncated, cfg, link, w_star=w_star)
    return w_hat, ledger
