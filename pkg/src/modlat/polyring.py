"""Exact arithmetic in Z[x]/(Phi_f): cyclotomic polynomials, reduction,
multiplication, Galois action.  Coefficients are plain Python integers (or
Fractions, which all routines tolerate); everything here is exact.
"""

from functools import lru_cache
from math import gcd


@lru_cache(maxsize=None)
def euler_phi(f):
    n, m, p = f, 1, 2
    while p * p <= n:
        if n % p == 0:
            m *= p - 1
            n //= p
            while n % p == 0:
                m *= p
                n //= p
        p += 1
    if n > 1:
        m *= n - 1
    return m


@lru_cache(maxsize=None)
def prime_factors(f):
    out, n, p = [], f, 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return tuple(out)


def is_log_smooth(f):
    """All prime factors of f bounded by ceil(log2 f)."""
    if f <= 2:
        return True
    bound = (f - 1).bit_length()  # ceil(log2 f)
    return all(p <= bound for p in prime_factors(f))


def _poly_trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_mul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def poly_divmod(a, m):
    """Divide by the monic polynomial m; returns (q, r) exactly."""
    assert m[-1] == 1
    a = list(a)
    dm = len(m) - 1
    q = [0] * max(0, len(a) - dm)
    for i in range(len(a) - 1, dm - 1, -1):
        c = a[i]
        if c == 0:
            continue
        q[i - dm] = c
        for j in range(dm + 1):
            a[i - dm + j] -= c * m[j]
    return q, _poly_trim(a)


@lru_cache(maxsize=None)
def cyclotomic_poly(f):
    """Coefficients of Phi_f, constant term first."""
    if f == 1:
        return (-1, 1)
    # (x^f - 1) / prod_{d|f, d<f} Phi_d
    num = [0] * (f + 1)
    num[0], num[f] = -1, 1
    for d in range(1, f):
        if f % d == 0:
            num, r = poly_divmod(num, list(cyclotomic_poly(d)))
            assert not r
    return tuple(num)


@lru_cache(maxsize=None)
def _power_table(f):
    """x^t mod Phi_f for 0 <= t < f, as tuples of length phi(f)."""
    n = euler_phi(f)
    phi = list(cyclotomic_poly(f))
    rows = []
    for t in range(f):
        if t < n:
            row = [0] * n
            row[t] = 1
        else:
            p = [0] * (t + 1)
            p[t] = 1
            _, r = poly_divmod(p, phi)
            row = list(r) + [0] * (n - len(r))
        rows.append(tuple(row))
    return tuple(rows)


def reduce_mod_cyclotomic(a, f):
    """a(x) mod Phi_f, returning exactly phi(f) coefficients."""
    n = euler_phi(f)
    if f & (f - 1) == 0 and f > 1:
        # power of two: x^n = -1 (negacyclic fold)
        out = [0] * n
        for t, c in enumerate(a):
            if c == 0:
                continue
            q, r = divmod(t, n)
            if q & 1:
                out[r] -= c
            else:
                out[r] += c
        return out
    out = [0] * n
    table = _power_table(f)
    for t, c in enumerate(a):
        if c == 0:
            continue
        t %= f  # x^f = 1
        row = table[t]
        for j in range(n):
            if row[j]:
                out[j] += c * row[j]
    return out


def ring_mul_coeffs(a, b, f):
    """Product in Z[x]/(Phi_f); inputs are length-phi(f) coefficient lists."""
    return reduce_mod_cyclotomic(poly_mul(list(a), list(b)), f)


def apply_automorphism(a, k, f):
    """sigma_k(a) for gcd(k, f) = 1: substitutes x -> x^k."""
    n = euler_phi(f)
    assert gcd(k, f) == 1
    k %= f
    if f & (f - 1) == 0 and f > 1:
        out = [0] * n
        for j, c in enumerate(a):
            if c == 0:
                continue
            t = (j * k) % f
            q, r = divmod(t, n)
            if q & 1:
                out[r] -= c
            else:
                out[r] += c
        return out
    out = [0] * n
    table = _power_table(f)
    for j, c in enumerate(a):
        if c == 0:
            continue
        row = table[(j * k) % f]
        for i in range(n):
            if row[i]:
                out[i] += c * row[i]
    return out


def conjugate_coeffs(a, f):
    """Complex conjugation: sigma_{-1}."""
    if f <= 2:
        return list(a)
    return apply_automorphism(a, f - 1, f)


def coprime_residues(f):
    return tuple(k for k in range(1, f + 1) if gcd(k, f) == 1) if f > 1 else (1,)


def galois_norm_coeffs(a, f):
    """N_{K/Q}(a) as an integer (or Fraction), by product of all conjugates."""
    acc = None
    for k in coprime_residues(f):
        conj = apply_automorphism(a, k, f) if k != 1 else list(a)
        acc = conj if acc is None else ring_mul_coeffs(acc, conj, f)
    # the product is fixed by the Galois group: a rational constant
    assert all(c == 0 for c in acc[1:]), "norm must be a constant"
    return acc[0]
