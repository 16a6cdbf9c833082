"""The doubly-recursive module reduction: outer rounds of size-reduction
plus parallel local reductions of projected rank-2 sublattices, descending
through the tower, with Schonhage / norm-Euclidean / unit-assisted base
cases at the bottom.
"""

import math
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import mpmath
from mpmath import mpf

from . import embed as embed_mod
from . import units as units_mod
from .errors import LiftFailed, RankDeficient
from .euclide import lift, tower_absolute_norm
from .exactmat import (
    col_scale,
    col_sub,
    col_swap,
    mat_identity,
    mat_mul,
)
from .ortho import orthogonalize, truncate_for_reduction
from .polyring import euler_phi
from .rng import Rng
from .sizered import size_reduce
from .tower import (
    FieldElement,
    descend_matrix,
    fe_int,
    fe_one,
    fe_zero,
    ring_mul,
)

TRIGGER_GUARD_BITS = 8


@dataclass
class ReduceParams:
    """Knobs of the recursive reducer.

    theorem_mode switches the round count to the proved formula (even rho
    greater than (2 d^2 / pi^2) ln((2+eps) alpha d^2 n p)); practice mode
    uses d^2 rounds with an early exit once a pass fires no local
    reduction.
    """

    theorem_mode: bool = False
    rounds: int | None = None
    epsilon: Fraction | None = None  # default: tower epsilon (1/2)
    lift_candidates: int = 32
    trigger_guard_bits: int = TRIGGER_GUARD_BITS
    early_exit: bool = True
    seed: int = 0
    max_rounds_cap: int = 256
    collect_heuristics: bool = True


@dataclass
class ReduceReport:
    rounds_run: int = 0
    fires: list = dc_field(default_factory=list)  # (round, j, p_loc)
    lift_failures: int = 0
    potential_trace: list = dc_field(default_factory=list)
    sum_p_loc: int = 0
    heuristic1_checked: int = 0
    heuristic1_violations: int = 0
    wall_time: float = 0.0
    children: list = dc_field(default_factory=list)

    def total_p_loc(self):
        return self.sum_p_loc + sum(c.total_p_loc() for c in self.children)


@dataclass
class ReductionProfile:
    """Flag profile mu and log-potential Pi of a basis (base-2 logs)."""

    mu: tuple
    potential: float
    round_index: int = 0


def profile_of_rfactor(R, alpha, epsilon):
    d = R.dim
    n = euler_phi(R.f)
    twist = 2 * float(1 + epsilon) * float(alpha) * n * n
    mu = []
    acc = 0.0
    for k in range(1, d + 1):
        acc += R.diag_log2_norm(k - 1) + k * twist
        mu.append(acc)
    pot = sum((d - i) * R.diag_log2_norm(i - 1) for i in range(1, d + 1))
    return ReductionProfile(mu=tuple(mu), potential=pot)


def profile(tower, M, params=None, prec=None):
    """Profile of an exact basis (orthogonalizes internally)."""
    level = tower.level_of(M[0][0].f)
    f = tower.conductors[level]
    bits = max(x.max_coeff_bits() for row in M for x in row)
    p = prec or (bits + euler_phi(f).bit_length() + 64)
    R = orthogonalize(M, f, p)
    eps = tower.epsilon if params is None or params.epsilon is None else params.epsilon
    return profile_of_rfactor(R, tower.alpha(level), eps)


# ---------------------------------------------------------------------------
# step operators (round analysis)


def delta_step(v, j):
    """Operator replacing (v_j, v_{j+1}) by ((v_{j-1}+v_{j+1})/2, v_j); 1-based j."""
    w = list(v)
    prev = v[j - 2] if j >= 2 else 0.0
    nxt = v[j] if j < len(v) else 0.0
    w[j - 1] = (prev + nxt) / 2.0
    if j < len(v):
        w[j] = v[j - 1]
    return w


def round_operator(v, odd):
    """Delta_o (odd 1-based indices) or Delta_e; disjoint pairs commute."""
    w = list(v)
    start = 1 if odd else 2
    d = len(v)
    for j in range(start, d + 1, 2):
        prev = v[j - 2] if j >= 2 else 0.0
        nxt = v[j] if j < d else 0.0
        w[j - 1] = (prev + nxt) / 2.0
        if j < d:
            w[j] = v[j - 1]
    return w


def iterate_step_operators(mu1, iters):
    """The sequence mu^(i): alternate Delta_e / Delta_o starting from mu^(1).

    Returns the list [mu^(1), ..., mu^(iters)].
    """
    out = [list(mu1)]
    cur = list(mu1)
    for i in range(2, iters + 1):
        cur = round_operator(cur, odd=(i % 2 == 0))
        out.append(list(cur))
    return out


# ---------------------------------------------------------------------------
# rank-2 base case over Z (Schonhage-style)


def _gram_2x2_int(M):
    g11 = sum(r[0] * r[0] for r in M)
    g12 = sum(r[0] * r[1] for r in M)
    g22 = sum(r[1] * r[1] for r in M)
    return g11, g12, g22


def _round_div(num, den):
    """Nearest integer to num/den for den > 0 (ties toward +infinity)."""
    return (2 * num + den) // (2 * den)


def lagrange_reduce_gram(g11, g12, g22, max_iters=None):
    """Exact Lagrange/Gauss reduction on a 2x2 Gram matrix.

    Returns (U, gram') with U integral of determinant +-1 and gram' reduced:
    g11 <= g22 and 2|g12| <= g11.
    """
    if g11 <= 0 or g22 <= 0 or g11 * g22 - g12 * g12 <= 0:
        raise RankDeficient("gram not positive definite")
    u = [[1, 0], [0, 1]]
    if g11 > g22:
        g11, g22 = g22, g11
        u = [[0, 1], [1, 0]]
    it = 0
    while True:
        it += 1
        if max_iters is not None and it > max_iters:
            break
        m = _round_div(g12, g11)
        if m != 0:
            # col2 -= m col1
            g22 = g22 - 2 * m * g12 + m * m * g11
            g12 = g12 - m * g11
            u[0][1] -= m * u[0][0]
            u[1][1] -= m * u[1][0]
        if g22 < g11:
            g11, g22 = g22, g11
            g12 = g12
            u[0][0], u[0][1] = u[0][1], u[0][0]
            u[1][0], u[1][1] = u[1][1], u[1][0]
        else:
            break
    return u, (g11, g12, g22)


def schonhage_reduce(M, bit_threshold=4096):
    """Lagrange-reduce a rank-2 integer basis (columns of M, any row count).

    Entries above the bit threshold are pre-reduced on leading-bit
    truncations of the Gram matrix (half-gcd style); an exact Lagrange pass
    finishes, so the output Gram-Schmidt data equals the textbook
    reduction's.
    """
    g11, g12, g22 = _gram_2x2_int(M)
    if g11 == 0 or g22 == 0 or g11 * g22 == g12 * g12:
        raise RankDeficient("columns dependent")
    u_tot = [[1, 0], [0, 1]]
    while True:
        bits = max(g11.bit_length(), g22.bit_length())
        if bits <= 2 * bit_threshold:
            break
        s = bits - bit_threshold
        t11, t12, t22 = g11 >> s, g12 >> s, g22 >> s
        if t11 <= 0 or t22 <= 0 or t11 * t22 - t12 * t12 <= 0:
            break
        u1, _ = lagrange_reduce_gram(t11, t12, t22, max_iters=bit_threshold)
        if u1 == [[1, 0], [0, 1]]:
            break
        a, b, c, d = u1[0][0], u1[0][1], u1[1][0], u1[1][1]
        n11 = a * a * g11 + 2 * a * c * g12 + c * c * g22
        n12 = a * b * g11 + (a * d + b * c) * g12 + c * d * g22
        n22 = b * b * g11 + 2 * b * d * g12 + d * d * g22
        if max(n11.bit_length(), n22.bit_length()) >= bits:
            break
        g11, g12, g22 = n11, n12, n22
        u_tot = [
            [u_tot[0][0] * a + u_tot[0][1] * c, u_tot[0][0] * b + u_tot[0][1] * d],
            [u_tot[1][0] * a + u_tot[1][1] * c, u_tot[1][0] * b + u_tot[1][1] * d],
        ]
    u2, _ = lagrange_reduce_gram(g11, g12, g22)
    return [
        [u_tot[0][0] * u2[0][0] + u_tot[0][1] * u2[1][0],
         u_tot[0][0] * u2[0][1] + u_tot[0][1] * u2[1][1]],
        [u_tot[1][0] * u2[0][0] + u_tot[1][1] * u2[1][0],
         u_tot[1][0] * u2[0][1] + u_tot[1][1] * u2[1][1]],
    ]


# ---------------------------------------------------------------------------
# rank-2 base case over a small field (norm-Euclidean descent, with the
# randomized unit trick for the degree-16 ring)


@dataclass
class BaseCaseStats:
    steps: int = 0
    restarts: int = 0
    rebalances: int = 0
    failures: int = 0


def _half_exponents(exps):
    """Exponents of roughly u^(-1/2); families with f/e a prime power must
    keep their augmentation (zero-sum) property to stay units."""
    from .polyring import prime_factors

    fams = []
    for e, z in exps.families:
        h = [-(c // 2) for c in z]
        if len(prime_factors(exps.f // e)) == 1:
            s = sum(h)
            if s != 0:
                h[0] -= s
        fams.append((e, tuple(h)))
    return units_mod.UnitExponents(exps.f, tuple(fams))


def _gram_2x2_field(M):
    f = M[0][0].f
    g11 = fe_zero(f)
    g12 = fe_zero(f)
    g22 = fe_zero(f)
    for r in M:
        g11 = g11 + ring_mul(r[0], r[0].conj())
        g12 = g12 + ring_mul(r[1], r[0].conj())
        g22 = g22 + ring_mul(r[1], r[1].conj())
    return g11, g12, g22


def _field_quotient_coeffs(num, den, bits):
    """Numeric power-basis coefficients of num/den at adequate precision."""
    f = num.f
    wp = bits + euler_phi(f).bit_length() + 48
    ev_n = embed_mod.embed_fft(list(num.coeffs), f, wp)
    ev_d = embed_mod.embed_fft(list(den.coeffs), f, wp)
    quot = embed_mod.pointwise_div(ev_n, ev_d, guard=wp - 8)
    return embed_mod.unembed_fft(quot, wp), quot


def _round_coeffs(coeffs):
    return [int(mpmath.nint(c)) for c in coeffs]


def field_gauss_reduce(tower, M, rng=None, unit_fallback=True, always_randomized=None,
                       max_restarts=100, max_steps=4096, stats=None,
                       drift_gate_bits=16):
    """Lagrange-style descent on algebraic norms for a rank-2 basis over a
    small cyclotomic ring (columns of M).

    Quotient rounding is coefficient-wise; when that fails to shrink the
    norm and unit_fallback is set, the randomized unit rounding of
    sqrt({mu}) twists the rounding (accept iff the norm strictly drops,
    redrawing the unit up to max_restarts times).  A persistent failure
    stops the descent gracefully.
    """
    f = M[0][0].f
    level = tower.level_of(f)
    n = euler_phi(f)
    rng = rng or Rng("base-case")
    stats = stats if stats is not None else BaseCaseStats()
    if always_randomized is None:
        always_randomized = False
    U = mat_identity(2, f)
    work = [row[:] for row in M]
    g11, g12, g22 = _gram_2x2_field(work)
    n11 = abs(tower_absolute_norm(tower, g11, level))
    n22 = abs(tower_absolute_norm(tower, g22, level))
    if n11 == 0 or n22 == 0:
        raise RankDeficient("zero column")

    def do_swap():
        nonlocal g11, g12, g22, n11, n22
        col_swap(U, 0, 1)
        col_swap(work, 0, 1)
        g11, g22 = g22, g11
        g12 = g12.conj()
        n11, n22 = n22, n11

    for _ in range(max_steps):
        if n11 > n22:
            do_swap()
        stats.steps += 1
        bits = max(g12.max_coeff_bits(), g11.max_coeff_bits(), 1)
        mu_coeffs, mu_emb = _field_quotient_coeffs(g12, g11, bits)
        m0 = _round_coeffs(mu_coeffs)

        def candidate_norm(mel):
            c = g22 - ring_mul(mel.conj(), g12) - ring_mul(mel, g12.conj()) \
                + ring_mul(ring_mul(mel, mel.conj()), g11)
            return c, abs(tower_absolute_norm(tower, c, level))

        accepted = None
        m0_el = FieldElement(f, tuple(m0))
        if not always_randomized:
            cand, ncand = candidate_norm(m0_el)
            if ncand < n22 and not m0_el.is_zero():
                accepted = (m0_el, cand, ncand)
        if accepted is None and unit_fallback and n >= 4:
            frac_vals = tuple(a - b for a, b in zip(
                mu_emb.values,
                embed_mod.embed_fft(m0, f, mu_emb.prec).values))
            with embed_mod.workprec(mu_emb.prec):
                sq = tuple(mpmath.sqrt(abs(v)) for v in frac_vals)
                sq_ev = embed_mod.EmbeddedVector(f, tuple(mpmath.mpc(v) for v in sq),
                                                 mu_emb.prec)
            for attempt in range(max_restarts):
                try:
                    exps, _ = units_mod.unit_round(
                        sq_ev, rng.derive(f"s{stats.steps}a{attempt}"))
                except Exception:
                    exps = units_mod.UnitExponents(f, ())
                if exps.is_trivial():
                    # u = 1: the twisted rounding degrades to plain m0
                    m_el = m0_el
                else:
                    neg = units_mod.UnitExponents(
                        f, tuple((e, tuple(-c for c in z)) for e, z in exps.families))
                    u_vals = units_mod.unit_embedding_values(exps, f, mu_emb.prec)
                    with embed_mod.workprec(mu_emb.prec):
                        tw_vals = tuple(u * v for u, v in zip(u_vals, frac_vals))
                    tw_coeffs = embed_mod.unembed_fft(
                        embed_mod.EmbeddedVector(f, tw_vals, mu_emb.prec), mu_emb.prec)
                    t_el = FieldElement(f, tuple(_round_coeffs(tw_coeffs)))
                    if t_el.is_zero():
                        m_el = m0_el
                    else:
                        u_inv = units_mod.exact_unit(neg, f, hint_prec=mu_emb.prec)
                        m_el = m0_el + ring_mul(t_el, u_inv)
                if not m_el.is_zero():
                    cand, ncand = candidate_norm(m_el)
                    if ncand < n22:
                        accepted = (m_el, cand, ncand)
                        break
                stats.restarts += 1
        if accepted is None:
            stats.failures += 1
            break
        m_el, g22_new, n22_new = accepted
        col_sub(U, 1, 0, m_el)
        col_sub(work, 1, 0, m_el)
        g12 = g12 - ring_mul(m_el, g11)
        g22, n22 = g22_new, n22_new
        if n22 == 0:
            break
        # unit-drift rebalance of the shorter column
        if n >= 4:
            ev = embed_mod.embed_fft(list(g11.coeffs), f, 64 + g11.max_coeff_bits())
            with embed_mod.workprec(ev.prec):
                logs = [float(mpmath.log(abs(v), 2)) for v in ev.values]
            if max(logs) - min(logs) > 2 * drift_gate_bits:
                try:
                    exps, _ = units_mod.unit_round(ev, rng.derive(f"reb{stats.steps}"))
                    half = _half_exponents(exps)
                    if not half.is_trivial():
                        u_el = units_mod.exact_unit(half, f)
                        col_scale(U, 0, u_el)
                        col_scale(work, 0, u_el)
                        g11, g12, g22 = _gram_2x2_field(work)
                        n11 = abs(tower_absolute_norm(tower, g11, level))
                        stats.rebalances += 1
                except Exception:
                    pass
        if n22 < n11:
            continue
    return U, stats


# ---------------------------------------------------------------------------
# the recursive Reduce


def theorem_round_count(d, alpha, epsilon, n, p):
    arg = float(2 + epsilon) * float(alpha) * d * d * n * max(2, p)
    rho = int(math.ceil((2 * d * d / (math.pi ** 2)) * math.log(arg)))
    if rho % 2:
        rho += 1
    return max(2, rho)


def _as_int_matrix(M):
    return [[int(x.coeffs[0]) for x in row] for row in M]


def _as_field_matrix(U, f):
    return [[fe_int(f, v) for v in row] for row in U]


def reduce_module(tower, M, params=None, _depth=0):
    """Reduce a module basis (rows of FieldElements, columns = vectors).

    Returns (U, report): U is an exact unimodular transform over the top
    ring with |N(det U)| = 1, and M @ U is the reduced basis.
    """
    params = params or ReduceParams()
    t0 = time.time()
    f = M[0][0].f
    level = tower.level_of(f)
    d = len(M[0])
    n = euler_phi(f)
    report = ReduceReport()
    rng = Rng(params.seed).derive(f"reduce-depth{_depth}-f{f}-d{d}")

    base_level = tower.base_level()
    if d == 2:
        if n == 1:
            U = schonhage_reduce(_as_int_matrix(M))
            report.rounds_run = 1
            report.wall_time = time.time() - t0
            return _as_field_matrix(U, f), report
        if level <= base_level or n <= tower.base_degree:
            U, stats = field_gauss_reduce(
                tower, M, rng=rng,
                unit_fallback=(n >= 16),
                always_randomized=(n >= 16),
            )
            report.rounds_run = stats.steps
            report.wall_time = time.time() - t0
            return U, report

    eps = params.epsilon if params.epsilon is not None else tower.epsilon
    alpha = tower.alpha(level)
    thresh_bits = 2 * float(1 + eps) * float(alpha) * n * n

    bits = max(x.max_coeff_bits() for row in M for x in row)
    p_round = bits + n.bit_length() + 64

    if params.rounds is not None:
        rho = params.rounds
    elif params.theorem_mode:
        rho = theorem_round_count(d, alpha, eps, n, p_round)
    elif _depth == 0:
        # top level runs until quiescent (d^2 rounds only below the top)
        rho = params.max_rounds_cap
    else:
        rho = d * d
    rho = min(rho, params.max_rounds_cap)

    U_tot = mat_identity(d, f)
    work = [row[:] for row in M]
    spread_hint = 0.0
    quiet_rounds = 0

    for i in range(1, rho + 1):
        bits_cur = max(x.max_coeff_bits() for row in work for x in row)
        p_round = int(max(bits_cur + n.bit_length() + 64, spread_hint + 64))
        R = None
        for _ in range(4):
            try:
                R = orthogonalize(work, f, p_round)
                break
            except RankDeficient:
                p_round *= 2
        if R is None:
            raise RankDeficient("orthogonalization failed at maximum precision")
        spread_hint = R.profile_spread_bits()
        sres = size_reduce(R, rng=rng.derive(f"round{i}"), update_r=True)
        U_tot = mat_mul(U_tot, sres.transform)
        work = mat_mul(work, sres.transform)
        report.potential_trace.append(
            profile_of_rfactor(R, alpha, eps).potential)
        fired = 0
        examined = 0
        start = i % 2  # 0-based column index; alternates per round
        for j in range(start, d - 1, 2):
            examined += 1
            gap = R.diag_log2_norm(j) - R.diag_log2_norm(j + 1)
            if gap <= thresh_bits + params.trigger_guard_bits:
                continue
            # local reduction of the projected block (j, j+1)
            try:
                block, p_loc = truncate_for_reduction(R, j, 2)
            except RankDeficient:
                continue
            report.sum_p_loc += p_loc
            if level > base_level and n > tower.base_degree:
                desc = descend_matrix(tower, block, level)
                U_sub, child = reduce_module(
                    tower.subtower(level - 1), desc, params, _depth + 1)
                report.children.append(child)
                try:
                    U_loc = lift(tower, U_sub, level,
                                 candidates=params.lift_candidates,
                                 rng=rng.derive(f"lift{i}-{j}"))
                except LiftFailed:
                    report.lift_failures += 1
                    continue
            else:
                if n == 1:
                    U_loc = _as_field_matrix(
                        schonhage_reduce(_as_int_matrix(block)), f)
                else:
                    U_loc, _ = field_gauss_reduce(
                        tower, block, rng=rng.derive(f"base{i}-{j}"),
                        unit_fallback=(n >= 16),
                        always_randomized=(n >= 16))
            if params.collect_heuristics:
                _check_heuristic1(tower, R, block, U_loc, j, alpha, n, report)
            emb = _embed_transform(U_tot, work, U_loc, j, f)
            fired += 1
            report.fires.append((i, j, p_loc))
        report.rounds_run = i
        # both block parities must be quiet before stopping (d = 2 only
        # examines a block every other round)
        quiet_rounds = quiet_rounds + 1 if (examined > 0 and fired == 0) else 0
        if params.early_exit and quiet_rounds >= 2:
            break
    report.wall_time = time.time() - t0
    return U_tot, report


def _embed_transform(U_tot, work, U_loc, j, f):
    """Apply a 2x2 local transform at columns (j, j+1) of U_tot and work."""
    a, b = U_loc[0][0], U_loc[0][1]
    c, dd = U_loc[1][0], U_loc[1][1]
    for M in (U_tot, work):
        for r in range(len(M)):
            x, y = M[r][j], M[r][j + 1]
            M[r][j] = ring_mul(x, a) + ring_mul(y, c)
            M[r][j + 1] = ring_mul(x, b) + ring_mul(y, dd)
    return None


def _check_heuristic1(tower, R, block, U_loc, j, alpha, n, report):
    """Empirical check of the lifting-size heuristic on the local block."""
    try:
        level = tower.level_of(block[0][0].f)
        newcol = [
            ring_mul(block[0][0], U_loc[0][0]) + ring_mul(block[0][1], U_loc[1][0]),
            ring_mul(block[1][0], U_loc[0][0]) + ring_mul(block[1][1], U_loc[1][0]),
        ]
        g = fe_zero(block[0][0].f)
        for x in newcol:
            g = g + ring_mul(x, x.conj())
        nn = abs(tower_absolute_norm(tower, g, level))
        if nn == 0:
            return
        log_new = math.log2(nn) / 2.0
        l1 = R.diag_log2_norm(j)
        l2 = R.diag_log2_norm(j + 1)
        # scale-free comparison: both sides shift equally under truncation
        g0 = fe_zero(block[0][0].f)
        for x in (block[0][0], block[1][0]):
            g0 = g0 + ring_mul(x, x.conj())
        n0 = abs(tower_absolute_norm(tower, g0, level))
        if n0 == 0:
            return
        log_old = math.log2(n0) / 2.0
        bound = min(float(alpha) * n * n + (log_old + (log_old + (l2 - l1))) / 2.0,
                    log_old)
        report.heuristic1_checked += 1
        if log_new > bound + 1.0:
            report.heuristic1_violations += 1
    except Exception:
        pass
