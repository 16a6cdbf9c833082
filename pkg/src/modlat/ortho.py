"""Householder QR over the embedded representation, the field-level
orthogonalization, block truncation, and condition estimation.

A matrix over K (x) C diagonalizes per embedding: the field-level R-factor
is the interleaving of phi(f)/2 independent complex QR decompositions of
dimension d.  Diagonal entries are phase-normalized to be positive real in
every embedding slot, so their algebraic norms read off the diagonal.
"""

import math
from dataclasses import dataclass, field

import mpmath
from mpmath import mpc, mpf

from . import embed as embed_mod
from .embed import EmbeddedVector, workprec
from .errors import RankDeficient, Singular
from .polyring import euler_phi

# guard-bit policy (one configuration record; see ortho design notes)
QR_PIVOT_GUARD = 4
TRUNCATION_GUARD = 32
DC_QR_MIN_DIM = 32


@dataclass
class EmbeddedMatrix:
    """m x d matrix over K (x) C, stored as one complex matrix per slot."""

    f: int
    slots: list  # nslot matrices, each a list of m rows of mpc
    prec: int

    @property
    def rows(self):
        return len(self.slots[0])

    @property
    def cols(self):
        return len(self.slots[0][0]) if self.slots[0] else 0

    @property
    def nslot(self):
        return len(self.slots)

    def entry(self, i, j):
        return EmbeddedVector(self.f, tuple(s[i][j] for s in self.slots), self.prec)

    def copy(self):
        return EmbeddedMatrix(self.f, [[row[:] for row in s] for s in self.slots], self.prec)


@dataclass
class RFactor:
    """Upper-triangular field-level R-factor with an error certificate.

    `rho_log2` bounds log2 of the relative backward error: R is the exact
    R-factor of some A' with ||A' - A|| / ||A|| <= 2^rho_log2.
    """

    f: int
    slots: list
    prec: int
    rho_log2: float = 0.0
    diag_log2: list = field(default_factory=list)  # per column: log2 N(R_jj)

    @property
    def dim(self):
        return len(self.slots[0])

    @property
    def nslot(self):
        return len(self.slots)

    def entry(self, i, j):
        return EmbeddedVector(self.f, tuple(s[i][j] for s in self.slots), self.prec)

    def diag_log2_norm(self, j):
        return self.diag_log2[j]

    def diag_slot_log2(self, j):
        """log2 |sigma_k(R_jj)| for each slot k."""
        out = []
        with workprec(self.prec + 8):
            for s in self.slots:
                out.append(float(mpmath.log(abs(s[j][j]), 2)))
        return out

    def profile_spread_bits(self):
        """log2(max slot diag / min slot diag) over the whole diagonal."""
        vals = []
        for j in range(self.dim):
            vals.extend(self.diag_slot_log2(j))
        return max(vals) - min(vals) if vals else 0.0


def embed_exact_matrix(M, f, p):
    """Rows of FieldElements -> EmbeddedMatrix at precision p."""
    nslot = max(1, euler_phi(f) // 2)
    m, d = len(M), len(M[0])
    slots = [[[None] * d for _ in range(m)] for _ in range(nslot)]
    for i in range(m):
        for j in range(d):
            ev = embed_mod.embed_fft(list(M[i][j].coeffs), f, p)
            for k in range(nslot):
                slots[k][i][j] = ev.values[k]
    return EmbeddedMatrix(f, slots, p)


# ---------------------------------------------------------------------------
# complex Householder QR (single slot)


def _qr_complex(a, p, pivot_floor):
    """In-place Householder on the row-major complex matrix `a`; returns the
    square upper-triangular R.  Raises RankDeficient below the pivot floor."""
    m, d = len(a), len(a[0])
    for j in range(d):
        # norm of the trailing column
        s = mpf(0)
        for i in range(j, m):
            v = a[i][j]
            s += v.real * v.real + v.imag * v.imag
        norm = mpmath.sqrt(s)
        if norm <= pivot_floor:
            raise RankDeficient(f"pivot {j} below precision guard")
        a1 = a[j][j]
        phase = a1 / abs(a1) if a1 != 0 else mpc(1)
        r0 = -norm * phase
        # v = a - r (only first entry differs), normalized
        v = [a[i][j] for i in range(j, m)]
        v[0] = v[0] - r0
        vn = mpf(0)
        for x in v:
            vn += x.real * x.real + x.imag * x.imag
        if vn == 0:
            a[j][j] = r0
            continue
        inv_vn = 2 / vn
        # apply I - 2 v v* / ||v||^2 to the trailing block
        for col in range(j, d):
            acc = mpc(0)
            for i in range(j, m):
                acc += v[i - j].conjugate() * a[i][col]
            acc *= inv_vn
            for i in range(j, m):
                a[i][col] -= acc * v[i - j]
        a[j][j] = r0  # exact by construction of the reflector
        for i in range(j + 1, m):
            a[i][j] = mpc(0)
    return [[a[i][j] if j >= i else mpc(0) for j in range(d)] for i in range(d)]


def _qr_complex_dc(a, p, pivot_floor):
    """Divide-and-conquer QR (matrix-multiplication style): recursively
    orthogonalize the left half, apply its reflections to the right half,
    then recurse on the trailing block.  Used for dimensions >= 32."""
    m, d = len(a), len(a[0])
    if d <= 16:
        return _qr_complex(a, p, pivot_floor)
    h = d // 2
    left = [[a[i][j] for j in range(h)] for i in range(m)]
    right = [[a[i][j] for j in range(h, d)] for i in range(m)]
    q1, r1 = _qr_explicit(left, p, pivot_floor)
    # B' = Q1* right
    bp = _matmul(_conj_transpose(q1), right)
    b1 = [bp[i] for i in range(h)]
    b2 = [bp[i] for i in range(h, m)]
    r2 = _qr_complex_dc(b2, p, pivot_floor) if b2 and b2[0] else []
    out = [[mpc(0)] * d for _ in range(d)]
    for i in range(h):
        for j in range(h):
            out[i][j] = r1[i][j]
        for j in range(d - h):
            out[i][h + j] = b1[i][j]
    for i in range(d - h):
        for j in range(d - h):
            out[h + i][h + j] = r2[i][j]
    return out


def _qr_explicit(a, p, pivot_floor):
    """QR with explicit Q (dense), for the divide-and-conquer backend."""
    m = len(a)
    work = [row[:] for row in a]
    d = len(a[0])
    q = [[mpc(1) if i == j else mpc(0) for j in range(m)] for i in range(m)]
    for j in range(d):
        s = mpf(0)
        for i in range(j, m):
            v = work[i][j]
            s += v.real * v.real + v.imag * v.imag
        norm = mpmath.sqrt(s)
        if norm <= pivot_floor:
            raise RankDeficient(f"pivot {j} below precision guard")
        a1 = work[j][j]
        phase = a1 / abs(a1) if a1 != 0 else mpc(1)
        r0 = -norm * phase
        v = [work[i][j] for i in range(j, m)]
        v[0] = v[0] - r0
        vn = mpf(0)
        for x in v:
            vn += x.real * x.real + x.imag * x.imag
        if vn == 0:
            continue
        inv_vn = 2 / vn
        for col in range(j, d):
            acc = mpc(0)
            for i in range(j, m):
                acc += v[i - j].conjugate() * work[i][col]
            acc *= inv_vn
            for i in range(j, m):
                work[i][col] -= acc * v[i - j]
        for col in range(m):
            acc = mpc(0)
            for i in range(j, m):
                acc += v[i - j].conjugate() * q[i][col]
            acc *= inv_vn
            for i in range(j, m):
                q[i][col] -= acc * v[i - j]
        work[j][j] = r0
        for i in range(j + 1, m):
            work[i][j] = mpc(0)
    # q currently holds Q*, rows beyond d unused for R
    qmat = _conj_transpose(q)
    r = [[work[i][j] if j >= i else mpc(0) for j in range(d)] for i in range(d)]
    return qmat, r


def _conj_transpose(a):
    m, d = len(a), len(a[0])
    return [[a[i][j].conjugate() for i in range(m)] for j in range(d)]


def _matmul(a, b):
    m, k, d = len(a), len(b), len(b[0])
    out = [[mpc(0)] * d for _ in range(m)]
    for i in range(m):
        ai = a[i]
        oi = out[i]
        for t in range(k):
            c = ai[t]
            if c == 0:
                continue
            bt = b[t]
            for j in range(d):
                oi[j] += c * bt[j]
    return out


def householder_qr(A, p=None, use_dc=None):
    """R-factor of an EmbeddedMatrix, per slot, with phase-normalized
    diagonal.  Certificate: relative error O(kappa(A) d^2 2^-p)."""
    p = A.prec if p is None else p
    m, d = A.rows, A.cols
    if m < d:
        raise RankDeficient("fewer rows than columns")
    if use_dc is None:
        use_dc = d >= DC_QR_MIN_DIM
    guard = max(1, d.bit_length()) + QR_PIVOT_GUARD
    out_slots = []
    with workprec(p + 2 * guard):
        for s in A.slots:
            scale = max((abs(v) for row in s for v in row), default=mpf(1))
            if scale == 0:
                raise RankDeficient("zero slot")
            floor = scale * mpf(2) ** (-(p - guard))
            work = [row[:] for row in s]
            r = _qr_complex_dc(work, p, floor) if use_dc else _qr_complex(work, p, floor)
            _normalize_phases(r)
            out_slots.append(r)
        diag = _diag_log2(out_slots, A.f)
    rho = math.log2(max(d, 2)) * 2 - p
    return RFactor(A.f, out_slots, p, rho_log2=rho, diag_log2=diag)


def _normalize_phases(r):
    d = len(r)
    for j in range(d):
        piv = r[j][j]
        mag = abs(piv)
        if mag == 0:
            continue
        ph = (piv / mag).conjugate()
        for col in range(j, d):
            r[j][col] = r[j][col] * ph
        r[j][j] = mpc(mag)


def _diag_log2(slots, f):
    dup = 2 if f > 2 else 1
    d = len(slots[0])
    out = []
    for j in range(d):
        acc = 0.0
        for s in slots:
            acc += dup * float(mpmath.log(abs(s[j][j]), 2))
        out.append(acc)
    return out


def orthogonalize(M, f, p):
    """Field-level R-factor of a matrix of FieldElements (rows)."""
    A = embed_exact_matrix(M, f, p)
    return householder_qr(A, p)


# ---------------------------------------------------------------------------
# block truncation for recursive reduction


def truncate_for_reduction(R, j, k, guard=TRUNCATION_GUARD):
    """Integer-scaled copy of the projected block R[j:j+k, j:j+k].

    The local precision is the bit spread between the largest embedding of
    R_jj and the smallest of R_{j+k-1,j+k-1}, plus guard bits; any
    unimodular transform computed on the truncation transfers to the exact
    block with profile error 2^-Omega(p_loc).

    Returns (rows of exact FieldElements, p_loc).
    """
    from .tower import FieldElement

    f = R.f
    n = euler_phi(f)
    top = max(R.diag_slot_log2(j))
    bot = min(R.diag_slot_log2(j + k - 1))
    p_loc = int(math.ceil(max(0.0, top - bot))) + guard
    wp = p_loc + guard + max(1, n.bit_length())
    with workprec(wp):
        coeffs = {}
        maxmag = mpf(0)
        for r in range(k):
            for c in range(r, k):
                ev = R.entry(j + r, j + c)
                cs = embed_mod.unembed_fft(
                    EmbeddedVector(f, ev.values, wp), wp
                )
                coeffs[(r, c)] = cs
                for v in cs:
                    maxmag = max(maxmag, abs(v))
        if maxmag == 0:
            raise RankDeficient("zero block")
        shift = p_loc - int(mpmath.floor(mpmath.log(maxmag, 2))) - 1
        scale = mpf(2) ** shift
        out = [[None] * k for _ in range(k)]
        zero = FieldElement(f, (0,) * n)
        for r in range(k):
            for c in range(k):
                if c < r:
                    out[r][c] = zero
                else:
                    ints = tuple(int(mpmath.nint(v * scale)) for v in coeffs[(r, c)])
                    out[r][c] = FieldElement(f, ints)
        for r in range(k):
            if out[r][r].is_zero():
                raise RankDeficient("diagonal truncated to zero; raise guard")
    return out, p_loc


# ---------------------------------------------------------------------------
# condition number


def condition_estimate(A, iters=10):
    """kappa(A) = ||A|| ||A^-1|| within a small factor, by power iteration
    on A*A and inverse iteration through the R-factor."""
    if A.rows != A.cols:
        raise Singular("condition estimate needs a square matrix")
    d = A.cols
    R = householder_qr(A)
    best = 0.0
    with workprec(A.prec + 8):
        for s, rs in zip(A.slots, R.slots):
            for j in range(d):
                if abs(rs[j][j]) == 0:
                    raise Singular("singular slot")
            smax = _power_iter_sigma(s, iters)
            smin = _inverse_power_iter_sigma(rs, iters)
            if smin == 0:
                raise Singular("vanishing smallest singular value")
            best = max(best, float(smax / smin))
    return best


def _power_iter_sigma(a, iters):
    d = len(a[0])
    v = [mpc(1) for _ in range(d)]
    sigma = mpf(1)
    for _ in range(iters):
        w = [sum(a[i][j] * v[j] for j in range(d)) for i in range(len(a))]
        u = [sum(a[i][j].conjugate() * w[i] for i in range(len(a))) for j in range(d)]
        nrm = mpmath.sqrt(sum(abs(x) ** 2 for x in u))
        if nrm == 0:
            return mpf(0)
        v = [x / nrm for x in u]
        wn = mpmath.sqrt(sum(abs(x) ** 2 for x in w))
        sigma = wn
    return sigma


def _inverse_power_iter_sigma(r, iters):
    """1 / smallest singular value of the triangular r, via solves."""
    d = len(r)
    v = [mpc(1) for _ in range(d)]
    inv_sigma = mpf(1)
    for _ in range(iters):
        w = _solve_upper(r, v)
        u = _solve_upper_conj_t(r, w)
        nrm = mpmath.sqrt(sum(abs(x) ** 2 for x in u))
        if nrm == 0:
            return mpf(0)
        v = [x / nrm for x in u]
        inv_sigma = mpmath.sqrt(nrm)
    return 1 / inv_sigma


def _solve_upper(r, b):
    d = len(r)
    x = [mpc(0)] * d
    for i in range(d - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, d):
            acc -= r[i][j] * x[j]
        x[i] = acc / r[i][i]
    return x


def _solve_upper_conj_t(r, b):
    d = len(r)
    x = [mpc(0)] * d
    for i in range(d):
        acc = b[i]
        for j in range(i):
            acc -= r[j][i].conjugate() * x[j]
        x[i] = acc / r[i][i].conjugate()
    return x
