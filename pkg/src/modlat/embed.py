"""Canonical (Archimedean) embedding and its inverse at controlled precision.

Numbers are arbitrary-precision binary values (mpmath mpf/mpc) manipulated
at an explicit working precision; every public entry point states its guard
bits.  The embedding of an element of Q[x]/(Phi_f) stores one value per
conjugate pair, indexed by the residues k coprime to f with k < f/2 in
ascending order (a single value at level 0).
"""

from dataclasses import dataclass
from functools import lru_cache

import mpmath
from mpmath import mp, mpc, mpf

from .errors import NearZeroEmbedding
from .polyring import coprime_residues, euler_phi

# guard-bit policy: every FFT entry point adds ceil(log2 n) + FFT_GUARD bits
FFT_GUARD = 8
ROOT_GUARD = 16


def workprec(p):
    return mp.workprec(max(int(p), 8))


@dataclass(frozen=True)
class EmbeddedVector:
    """Values of one embedding per conjugate pair; length max(1, phi(f)/2)."""

    f: int
    values: tuple
    prec: int

    def __len__(self):
        return len(self.values)


def embedding_indices(f):
    """Representatives of the conjugate pairs: odd case is k < f/2."""
    if f <= 2:
        return (1,)
    return tuple(k for k in coprime_residues(f) if 2 * k < f)


def nrep(f):
    return max(1, euler_phi(f) // 2)


# ---------------------------------------------------------------------------
# primitive roots of unity


def refine_root(f, p):
    """exp(2*pi*i/f) with absolute error <= 2^-p.

    Newton's iteration x' = x - (x^f - 1)/(f x^(f-1)) starting from
    1 + 6.3i/f (quadratic contraction |x'-z| <= f |x-z|^2); small f is
    evaluated directly by halving the argument from exact fourth roots.
    """
    if f == 1:
        return mpc(1)
    if f == 2:
        return mpc(-1)
    with workprec(p + ROOT_GUARD):
        if f < 128:
            if f & (f - 1) == 0:
                # sqrt chain from i: angle 2pi/4 -> 2pi/f
                z = mpc(0, 1)
                m = 4
                while m < f:
                    z = mpmath.sqrt(z)
                    m *= 2
                return +z
            return mpmath.expjpi(mpf(2) / f)
        x = mpc(1, mpf("6.3") / f)
        # quadratic convergence: error after k steps ~ f^(2^k-1) e0^(2^k)
        for _ in range(max(6, p.bit_length() + 3)):
            xf1 = x ** (f - 1)
            delta = (xf1 * x - 1) / (f * xf1)
            x = x - delta
            if abs(delta) < mpf(2) ** (-(p + ROOT_GUARD // 2)):
                break
        return +x


@lru_cache(maxsize=64)
def _root_powers(f, p):
    """zeta_f^j for 0 <= j < f at precision p (tuple of mpc)."""
    with workprec(p + ROOT_GUARD + max(1, f.bit_length())):
        z = refine_root(f, p + ROOT_GUARD + f.bit_length())
        out = [mpc(1)] * f
        for j in range(1, f):
            out[j] = out[j - 1] * z
        return tuple(out)


# ---------------------------------------------------------------------------
# FFT cores


def _fft_pow2(vec, roots):
    """In-order radix-2 DFT: X_t = sum_j vec[j] * roots[(j*t) % n]."""
    n = len(vec)
    if n == 1:
        return list(vec)
    half = roots[::2]
    even = _fft_pow2(vec[::2], half)
    odd = _fft_pow2(vec[1::2], half)
    out = [None] * n
    for t in range(n // 2):
        w = roots[t] * odd[t]
        out[t] = even[t] + w
        out[t + n // 2] = even[t] - w
    return out


def _dft_pow2(vec, f_root_table, inverse=False):
    n = len(vec)
    assert n & (n - 1) == 0
    step = len(f_root_table) // n
    roots = [f_root_table[(j * step) % len(f_root_table)] for j in range(n)]
    if inverse:
        roots = [r.conjugate() for r in roots]
    out = _fft_pow2(list(vec), roots)
    if inverse:
        inv_n = mpf(1) / n
        out = [v * inv_n for v in out]
    return out


def _bluestein(vec, f, p):
    """DFT of arbitrary size f via chirp transform over a power of two."""
    m = 1
    while m < 2 * f - 1:
        m *= 2
    tab2f = _root_powers(2 * f, p)

    def chirp(j):
        return tab2f[(j * j) % (2 * f)]

    a = [vec[j] * chirp(j) for j in range(f)] + [mpc(0)] * (m - f)
    b = [mpc(0)] * m
    for j in range(f):
        w = chirp(j).conjugate()
        b[j] = w
        if j:
            b[m - j] = w
    tabm = _root_powers(m, p)
    fa = _dft_pow2(a, tabm)
    fb = _dft_pow2(b, tabm)
    prod = [x * y for x, y in zip(fa, fb)]
    conv = _dft_pow2(prod, tabm, inverse=True)
    return [conv[k] * chirp(k) for k in range(f)]


def dft(vec, f, p):
    """X_m = sum_j vec[j] zeta_f^(jm) for m in [0, f)."""
    with workprec(p):
        if f & (f - 1) == 0:
            return _dft_pow2(list(vec) + [mpc(0)] * (f - len(vec)), _root_powers(f, p))
        return _bluestein(list(vec) + [mpc(0)] * (f - len(vec)), f, p)


# ---------------------------------------------------------------------------
# embed / unembed


def _to_mpc(c):
    if isinstance(c, mpc):
        return c
    if isinstance(c, mpf):
        return mpc(c)
    if isinstance(c, int):
        return mpc(c)
    return mpc(mpf(c.numerator) / c.denominator) if hasattr(c, "numerator") else mpc(c)


def embed_fft(coeffs, f, p):
    """Embedding of sum coeffs[j] x^j at the representative roots.

    The working precision adds ceil(log2 n) + 8 guard bits (unitary
    composition bound for the log-depth FFT factorization).
    """
    n = euler_phi(f)
    guard = max(1, n.bit_length()) + FFT_GUARD
    wp = p + guard
    if f <= 2:
        with workprec(wp):
            return EmbeddedVector(f, (_to_mpc(coeffs[0]),), p)
    with workprec(wp):
        vec = [_to_mpc(c) for c in coeffs]
        if f & (f - 1) == 0:
            # odd-index DFT: twist by zeta_f^j then DFT of size n = f/2
            tab = _root_powers(f, wp)
            tw = [vec[j] * tab[j] for j in range(n)]
            full = _dft_pow2(tw, _root_powers(n, wp) if n > 1 else (mpc(1),))
            vals = tuple(full[t] for t in range(n // 2))
        else:
            full = _bluestein(vec + [mpc(0)] * (f - n), f, wp)
            vals = tuple(full[k] for k in embedding_indices(f))
        return EmbeddedVector(f, vals, p)


def _full_values(ev):
    """All phi(f) embedding values ordered by coprime residue."""
    f = ev.f
    if f <= 2:
        return {1: ev.values[0]}
    reps = embedding_indices(f)
    out = {}
    for k, v in zip(reps, ev.values):
        out[k] = v
        out[f - k] = v.conjugate()
    return out


def unembed_fft(ev, p=None):
    """Inverse of embed_fft; returns fixed-point power-basis coefficients
    (list of mpf) for a real-coefficient element."""
    f = ev.f
    p = ev.prec if p is None else p
    n = euler_phi(f)
    guard = max(1, n.bit_length()) + FFT_GUARD
    wp = p + guard
    if f <= 2:
        with workprec(wp):
            return [ev.values[0].real]
    with workprec(wp):
        if f & (f - 1) == 0:
            full = [None] * n
            for t in range(n // 2):
                full[t] = ev.values[t]
                full[n - 1 - t] = ev.values[t].conjugate()
            y = _dft_pow2(full, _root_powers(n, wp), inverse=True)
            tab = _root_powers(f, wp)
            return [(y[j] * tab[j].conjugate()).real for j in range(n)]
        return _unembed_general(ev, wp)


def _unembed_general(ev, wp):
    f = ev.f
    n = euler_phi(f)
    vals = _full_values(ev)
    residues = coprime_residues(f)
    tab = _root_powers(f, wp)
    rows = [[tab[(k * j) % f] for j in range(n)] for k in residues]
    rhs = [vals[k] for k in residues]
    sol = _solve_complex(rows, rhs)
    return [c.real for c in sol]


def _solve_complex(rows, rhs):
    n = len(rows)
    a = [list(r) + [rhs[i]] for i, r in enumerate(rows)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col:
                fmul = a[r][col]
                if fmul != 0:
                    a[r] = [v - fmul * w for v, w in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def pointwise_mul(u, v):
    assert u.f == v.f
    p = min(u.prec, v.prec)
    with workprec(p + FFT_GUARD):
        return EmbeddedVector(u.f, tuple(a * b for a, b in zip(u.values, v.values)), p)


def pointwise_div(u, v, guard=None):
    assert u.f == v.f
    p = min(u.prec, v.prec)
    floor = mpf(2) ** (-(p if guard is None else guard))
    with workprec(p + FFT_GUARD):
        for b in v.values:
            if abs(b) <= floor:
                raise NearZeroEmbedding("division by near-zero embedding")
        return EmbeddedVector(u.f, tuple(a / b for a, b in zip(u.values, v.values)), p)


def canonical_norm_sq(ev):
    """||a||^2 = sum over all embeddings |sigma(a)|^2 (2x the stored half)."""
    with workprec(ev.prec + FFT_GUARD):
        s = mpf(0)
        for v in ev.values:
            s += v.real * v.real + v.imag * v.imag
        return 2 * s if ev.f > 2 else s


def log2_abs_norm(ev, guard=None):
    """log2 |N_{K/Q}(a)| from the embeddings."""
    with workprec(ev.prec + FFT_GUARD):
        acc = mpf(0)
        floor = mpf(2) ** (-(ev.prec if guard is None else guard))
        for v in ev.values:
            m = abs(v)
            if m <= floor:
                raise NearZeroEmbedding("norm underflows the precision guard")
            acc += mpmath.log(m, 2)
        return float(2 * acc) if ev.f > 2 else float(acc)
