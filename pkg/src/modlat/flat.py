"""Block-recursive reduction of high-rank lattices over a fixed ring.

One round = QR, Seysen size reduction, then recursive reduction of
half-overlapping block pairs whose covolumes are out of balance; blocks
shift by half a block between rounds so all vectors mix.  Over Z the
numeric kernels run in plain floats when the local precision allows and
in arbitrary-precision reals otherwise.
"""

import math
import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import mpmath
from mpmath import mpf

from .errors import RankDeficient, ShapeViolation
from .polyring import euler_phi
from .reduce import schonhage_reduce
from .rng import Rng

FLOAT64_MAX_PREC = 44
F64_RANGE_BITS = 480


@dataclass
class FlatParams:
    blocks: int = 4  # D
    alpha: Fraction = Fraction(1, 6)
    epsilon: Fraction = Fraction(1, 2)
    rounds: int | None = None
    trigger_guard_bits: int = 2
    early_exit: bool = True
    seed: int = 0
    max_rounds_cap: int = 512
    collect_heuristics: bool = True


@dataclass
class FlatReport:
    rounds_run: int = 0
    fires: list = dc_field(default_factory=list)  # (round, j, p_loc)
    potential_trace: list = dc_field(default_factory=list)
    sum_p_loc: int = 0
    potential_drops: list = dc_field(default_factory=list)  # per fire round
    p_loc_trace: list = dc_field(default_factory=list)
    wall_time: float = 0.0
    children: list = dc_field(default_factory=list)

    def total_p_loc(self):
        return self.sum_p_loc + sum(c.total_p_loc() for c in self.children)


# ---------------------------------------------------------------------------
# integer-matrix helpers (columns are basis vectors; storage is row-major)


def int_matmul(A, B):
    m, k, d = len(A), len(B), len(B[0])
    out = [[0] * d for _ in range(m)]
    for i in range(m):
        Ai = A[i]
        Oi = out[i]
        for t in range(k):
            a = Ai[t]
            if a:
                Bt = B[t]
                for j in range(d):
                    if Bt[j]:
                        Oi[j] += a * Bt[j]
    return out


def int_identity(d):
    return [[1 if i == j else 0 for j in range(d)] for i in range(d)]


def max_bits(M):
    return max((abs(v).bit_length() for row in M for v in row), default=1)


def _truncated(M, keep_bits):
    b = max_bits(M)
    s = max(0, b - keep_bits)
    if s == 0:
        return M, 0
    return [[v >> s if v >= 0 else -((-v) >> s) for v in row] for row in M], s


# ---------------------------------------------------------------------------
# real QR / Seysen kernels (dual backend: float or mpf)


def _qr_real(M, prec):
    """Householder QR of a row-major real matrix (rows >= cols) at the
    requested precision; returns the square R with positive diagonal."""
    use_f64 = prec <= FLOAT64_MAX_PREC and max_bits(M) < F64_RANGE_BITS
    m, d = len(M), len(M[0])
    if use_f64:
        a = [[float(v) for v in row] for row in M]
        return _householder_real(a, float(0), math.sqrt, d)
    with mpmath.mp.workprec(prec + 16):
        a = [[mpf(v) for v in row] for row in M]
        return _householder_real(a, mpf(0), mpmath.sqrt, d)


def _householder_real(a, zero, sqrt_fn, d):
    m = len(a)
    for j in range(d):
        s = zero
        for i in range(j, m):
            s += a[i][j] * a[i][j]
        norm = sqrt_fn(s)
        if norm == 0:
            raise RankDeficient(f"zero pivot at column {j}")
        r0 = -norm if a[j][j] >= 0 else norm
        v = [a[i][j] for i in range(j, m)]
        v[0] -= r0
        vn = zero
        for x in v:
            vn += x * x
        if vn != 0:
            inv = 2 / vn
            for col in range(j, d):
                acc = zero
                for i in range(j, m):
                    acc += v[i - j] * a[i][col]
                acc *= inv
                for i in range(j, m):
                    a[i][col] -= acc * v[i - j]
        a[j][j] = abs(r0)
        for i in range(j + 1, m):
            a[i][j] = zero
    # flip rows to make the diagonal positive (already abs on diag)
    r = [[a[i][j] if j >= i else zero for j in range(d)] for i in range(d)]
    for i in range(d):
        if r[i][i] < 0:
            for j in range(i, d):
                r[i][j] = -r[i][j]
    return r


def _invert_tri_real(r):
    d = len(r)
    if d == 1:
        return [[1 / r[0][0]]]
    h = d // 2
    a = [row[:h] for row in r[:h]]
    b = [row[h:] for row in r[:h]]
    c = [row[h:] for row in r[h:]]
    ai, ci = _invert_tri_real(a), _invert_tri_real(c)
    abc = _real_matmul(_real_matmul(ai, b), ci)
    out = [[0 * r[0][0]] * d for _ in range(d)]
    for i in range(h):
        for j in range(h):
            out[i][j] = ai[i][j]
        for j in range(d - h):
            out[i][h + j] = -abc[i][j]
    for i in range(d - h):
        for j in range(d - h):
            out[h + i][h + j] = ci[i][j]
    return out


def _real_matmul(a, b):
    m, k, d = len(a), len(b), len(b[0])
    zero = 0 * a[0][0]
    out = [[zero] * d for _ in range(m)]
    for i in range(m):
        for t in range(k):
            c = a[i][t]
            if c:
                bt = b[t]
                oi = out[i]
                for j in range(d):
                    oi[j] += c * bt[j]
    return out


def _seysen_real(r):
    """Integer unitriangular U per Seysen's recursion on a triangular real
    matrix; scale-free in the row scaling of r."""
    d = len(r)
    if d == 1:
        return [[1]]
    h = d // 2
    a = [row[:h] for row in r[:h]]
    b = [row[h:] for row in r[:h]]
    c = [row[h:] for row in r[h:]]
    u1 = _seysen_real(a)
    u2 = _seysen_real(c)
    au1 = _real_matmul(a, [[x * 1 for x in row] for row in u1])
    a_inv = _invert_tri_real(au1)
    bu2 = _real_matmul(b, [[x * 1 for x in row] for row in u2])
    prod = _real_matmul(a_inv, bu2)
    w = [[_nint_num(prod[i][j]) for j in range(d - h)] for i in range(h)]
    out = [[0] * d for _ in range(d)]
    for i in range(h):
        for j in range(h):
            out[i][j] = u1[i][j]
    for i in range(d - h):
        for j in range(d - h):
            out[h + i][h + j] = u2[i][j]
    u1w = int_matmul(u1, w)
    for i in range(h):
        for j in range(d - h):
            out[i][h + j] = -u1w[i][j]
    return out


def _nint_num(x):
    if isinstance(x, float):
        return int(round(x))
    return int(mpmath.nint(x))


def seysen_size_reduce_z(R_real):
    """Public wrapper: Seysen transform for a real triangular factor."""
    return _seysen_real(R_real)


# ---------------------------------------------------------------------------
# block reduction over Z


def _diag_log2_real(r):
    out = []
    for i in range(len(r)):
        v = r[i][i]
        out.append(math.log2(float(v)) if isinstance(v, float) else float(mpmath.log(v, 2)))
    return out


def _potential(diag):
    d = len(diag)
    return sum((d - i) * diag[i] for i in range(d))


def block_reduce(M, params=None, oracle=None, _depth=0):
    """Alg.-6-style reduction of an integer lattice basis (columns of M).

    Returns (U, report).  The rank-2 base case is the Schonhage reducer
    unless another oracle is supplied; recursive window reductions run on
    integer-scaled truncations of the R-factor at the local precision
    implied by the window's profile spread.
    """
    params = params or FlatParams()
    t0 = time.time()
    m, d = len(M), len(M[0])
    report = FlatReport()
    oracle = oracle or schonhage_reduce
    if d == 1:
        report.wall_time = time.time() - t0
        return int_identity(1), report
    if d == 2:
        U = oracle(M)
        report.rounds_run = 1
        report.wall_time = time.time() - t0
        return U, report

    D = min(params.blocks, d)
    # D = 2 would make the window the whole matrix: degrade to pairwise
    # windows, which is the rank-recursive strategy over a fixed ring
    b = max(1, d // D) if D > 2 else 1
    alpha = float(params.alpha)
    eps = float(params.epsilon)
    # covolume trigger threshold per block pair, in bits
    work = [row[:] for row in M]
    U_tot = int_identity(d)
    spread_hint = 64.0

    if params.rounds is not None:
        rho = params.rounds
    else:
        rho = max(8, D * D * max(1, max_bits(M).bit_length()))
    rho = min(rho, params.max_rounds_cap)

    prev_pot = None
    quiet_rounds = 0
    for i in range(1, rho + 1):
        T, shift = _truncated(work, int(spread_hint) + 96)
        prec = max_bits(T) + 48
        R = None
        for _ in range(4):
            try:
                R = _qr_real(T, prec)
                break
            except (RankDeficient, ZeroDivisionError):
                T, shift = _truncated(work, max_bits(work))
                prec = max_bits(T) + 48
        if R is None:
            import sys
            print("QR-FAIL-DEBUG dims", len(work), len(work[0]), "bits", max_bits(work), file=sys.stderr)
            for row in work[:10]:
                print([v.bit_length() * (1 if v >= 0 else -1) for v in row], file=sys.stderr)
            raise RankDeficient("flat QR failed")
        diag = _diag_log2_real(R)
        spread_hint = (max(diag) - min(diag)) + 32 if diag else 64.0
        # Seysen size reduction, then a fresh QR: updating R through the
        # transform loses the small-diagonal rows to cancellation
        if isinstance(R[0][0], float):
            Us = _seysen_real(R)
        else:
            with mpmath.mp.workprec(prec + 16):
                Us = _seysen_real(R)
        if Us != int_identity(d):
            U_tot = int_matmul(U_tot, Us)
            work = int_matmul(work, Us)
            T, shift = _truncated(work, int(spread_hint) + 96)
            prec = max_bits(T) + 48
            try:
                R = _qr_real(T, prec)
            except (RankDeficient, ZeroDivisionError):
                T, shift = _truncated(work, max_bits(work))
                prec = max_bits(T) + 48
                R = _qr_real(T, prec)
            diag = _diag_log2_real(R)
        pot = _potential(diag)
        report.potential_trace.append(pot)
        fired = 0
        examined = 0
        start = (b * (i % 2)) if D > 2 else 0
        wsize = 2 * b
        j = start
        while j + 1 < d:
            hi = min(j + wsize, d)
            if hi - j < 2:
                break
            half = j + (hi - j) // 2
            examined += 1
            v1 = sum(diag[j:half])
            v2 = sum(diag[half:hi])
            ncols1 = half - j
            ncols2 = hi - half
            thresh = 2 * (1 + eps) * alpha * (ncols1 + ncols2) / 2.0
            # per-column-normalized covolume comparison
            if v1 / ncols1 - v2 / ncols2 > thresh + params.trigger_guard_bits:
                Uw, p_loc = _reduce_window(R, j, hi, params, oracle, report, _depth)
                if Uw is not None:
                    Uw_full = _embed_window(Uw, d, j)
                    U_tot = int_matmul(U_tot, Uw_full)
                    work = int_matmul(work, Uw_full)
                    fired += 1
                    report.fires.append((i, j, p_loc))
                    report.p_loc_trace.append(p_loc)
            j += wsize
        report.rounds_run = i
        if prev_pot is not None and fired:
            report.potential_drops.append(prev_pot - pot)
        prev_pot = pot
        # both window offsets must be quiet before stopping
        quiet_rounds = quiet_rounds + 1 if (examined > 0 and fired == 0) else 0
        if params.early_exit and quiet_rounds >= 2:
            break
    report.wall_time = time.time() - t0
    return U_tot, report


def _reduce_window(R, j, hi, params, oracle, report, depth):
    """Truncate the window R[j:hi, j:hi] to its local precision and reduce
    it recursively; returns (U, p_loc)."""
    k = hi - j
    diag = _diag_log2_real(R)
    top = max(diag[j:hi])
    bot = min(diag[j:hi])
    p_loc = int(math.ceil(max(0.0, top - bot))) + 32
    # scale the window so the largest entry has ~p_loc bits
    is_f64 = isinstance(R[0][0], float)
    entries = [[R[j + r][j + c] if c >= r else 0 for c in range(k)] for r in range(k)]
    if is_f64:
        maxv = max(abs(entries[r][c]) for r in range(k) for c in range(r, k))
        if maxv == 0:
            return None, p_loc
        maxlog = math.log2(maxv)
    else:
        maxlog = None
        for r in range(k):
            for c in range(r, k):
                v = entries[r][c]
                if v != 0:
                    lv = float(mpmath.log(mpmath.fabs(v), 2))
                    maxlog = lv if maxlog is None else max(maxlog, lv)
        if maxlog is None:
            return None, p_loc
    shift = p_loc - int(math.floor(maxlog)) - 1
    W = [[0] * k for _ in range(k)]
    if is_f64:
        sc = 2.0 ** shift
        for r in range(k):
            for c in range(r, k):
                W[r][c] = int(round(entries[r][c] * sc))
    else:
        with mpmath.mp.workprec(p_loc + 64):
            sc = mpf(2) ** shift
            for r in range(k):
                for c in range(r, k):
                    W[r][c] = int(mpmath.nint(entries[r][c] * sc))
    for r in range(k):
        if W[r][r] == 0:
            return None, p_loc
    report.sum_p_loc += p_loc
    sub_params = FlatParams(
        blocks=params.blocks, alpha=params.alpha, epsilon=params.epsilon,
        trigger_guard_bits=params.trigger_guard_bits, early_exit=params.early_exit,
        seed=params.seed, max_rounds_cap=params.max_rounds_cap,
        collect_heuristics=params.collect_heuristics,
    )
    Uw, child = block_reduce(W, sub_params, oracle, _depth=depth + 1)
    report.children.append(child)
    return Uw, p_loc


def _embed_window(Uw, d, j):
    out = int_identity(d)
    k = len(Uw)
    for r in range(k):
        for c in range(k):
            out[j + r][j + c] = Uw[r][c]
    return out


def first_vector_log2(M):
    """log2 of the Euclidean norm of the first column."""
    s = 0
    for row in M:
        s += row[0] * row[0]
    return 0.5 * math.log2(s) if s else float("-inf")


# ---------------------------------------------------------------------------
# knapsack-style incremental reduction (doubling passes)


def knapsack_reduce(A, params=None, bandwidth_factor=4, bandwidth_slack=2):
    """Reduce a roughly-triangular (banded) integer matrix column block by
    column block, doubling the reduced prefix each pass.

    Incoming columns are pre-reduced against each reduced prefix A_j by
    Babai rounding through the prefix QR before the combined window is
    reduced; the shape precondition (lower bandwidth O(j)) is checked
    loosely and violations raise ShapeViolation.
    """
    params = params or FlatParams()
    m, d = len(A), len(A[0])
    for j in range(d):
        nz = [i for i in range(m) if A[i][j] != 0]
        if nz and nz[-1] > bandwidth_factor * (j + 1) + bandwidth_slack:
            raise ShapeViolation(
                f"column {j} has support down to row {nz[-1]}")
    report = FlatReport()
    t0 = time.time()
    cols = [[A[i][c] for i in range(m)] for c in range(d)]
    # reduced prefix as column lists, with their transform columns over Z^d
    reduced_cols = [cols[0]]
    trans_cols = [[1 if r == 0 else 0 for r in range(d)]]
    prefix = 1
    while prefix < d:
        take = min(prefix, d - prefix)
        pref_mat = [[reduced_cols[c][i] for c in range(prefix)] for i in range(m)]
        prec = max_bits(pref_mat) + 48
        Rp = _qr_real(pref_mat, prec)
        incoming, incoming_tr = [], []
        for t in range(take):
            x = cols[prefix + t][:]
            xtr = [1 if r == prefix + t else 0 for r in range(d)]
            coeffs = _babai_coeffs(pref_mat, Rp, x, prec)
            for c, q in enumerate(coeffs):
                if q:
                    for i in range(m):
                        x[i] -= q * reduced_cols[c][i]
                    for r in range(d):
                        xtr[r] -= q * trans_cols[c][r]
            incoming.append(x)
            incoming_tr.append(xtr)
        window_cols = reduced_cols + incoming
        window_tr = trans_cols + incoming_tr
        W = [[window_cols[c][i] for c in range(len(window_cols))] for i in range(m)]
        Uw, child = block_reduce(W, params)
        report.children.append(child)
        red = int_matmul(W, Uw)
        tr_mat = [[window_tr[c][r] for c in range(len(window_cols))] for r in range(d)]
        tr_red = int_matmul(tr_mat, Uw)
        prefix = len(window_cols)
        reduced_cols = [[red[i][c] for i in range(m)] for c in range(prefix)]
        trans_cols = [[tr_red[r][c] for r in range(d)] for c in range(prefix)]
    U_tot = [[trans_cols[c][r] for c in range(d)] for r in range(d)]
    report.wall_time = time.time() - t0
    report.rounds_run = sum(c.rounds_run for c in report.children)
    return U_tot, report


def _babai_coeffs(pref_mat, Rp, x, prec):
    """round(R^-1 Q^T x) via the normal equations through the prefix QR."""
    dcols = len(Rp)
    g = []
    for c in range(dcols):
        acc = 0
        for i in range(len(pref_mat)):
            acc += pref_mat[i][c] * x[i]
        g.append(acc)
    use_f64 = isinstance(Rp[0][0], float)
    if use_f64:
        y = [float(v) for v in g]
        z = _solve_lower_t(Rp, y)
        w = _solve_upper_r(Rp, z)
        return [int(round(v)) for v in w]
    with mpmath.mp.workprec(prec + 16):
        y = [mpf(v) for v in g]
        z = _solve_lower_t(Rp, y)
        w = _solve_upper_r(Rp, z)
        return [int(mpmath.nint(v)) for v in w]


def _solve_lower_t(r, b):
    # solves R^T z = b (R upper-triangular)
    d = len(r)
    z = [0 * b[0]] * d
    for i in range(d):
        acc = b[i]
        for j in range(i):
            acc -= r[j][i] * z[j]
        z[i] = acc / r[i][i]
    return z


def _solve_upper_r(r, b):
    d = len(r)
    x = [0 * b[0]] * d
    for i in range(d - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, d):
            acc -= r[i][j] * x[j]
        x[i] = acc / r[i][i]
    return x
