"""Bezout machinery over the tower: extended gcd on Z, the recursive
norm-descent solver, and completion of a short vector into a 2x2
unimodular transform.
"""

import math

from .errors import LiftFailed, NotCoprime, NotCoprimeNorms
from .exactmat import mat_mul, mat_vec
from .ortho import orthogonalize
from .rng import Rng
from .sizered import size_reduce
from .tower import (
    FieldElement,
    absolute_norm,
    ascend,
    fe_one,
    fe_zero,
    galois_apply,
    lift_to_level,
    relative_norm,
    ring_mul,
    _relative_galois,
)
from .units import UnitExponents, exact_unit

LIFT_DEFAULT_CANDIDATES = 32


def ex_gcd(a, b):
    """Minimal Bezout pair: a*u + b*v = 1 with |u| <= |b|, |v| <= |a|."""
    if math.gcd(a, b) != 1:
        raise NotCoprime(f"gcd({a}, {b}) != 1")
    if b == 0:
        return (1 if a > 0 else -1, 0)
    if a == 0:
        return (0, 1 if b > 0 else -1)
    u = pow(a, -1, abs(b))  # in [0, |b|)
    # balance: choose the representative with |u| <= |b| minimizing |u|
    if 2 * u > abs(b):
        u -= abs(b)
    v = (1 - a * u) // b
    assert a * u + b * v == 1
    return u, v


def tower_absolute_norm(tower, a, level=None):
    """N_{K_level/Q}(a) by composing relative norms down the chain."""
    level = tower.level_of(a.f) if level is None else level
    cur = a
    for lvl in range(level, 0, -1):
        cur = relative_norm(tower, cur, lvl)
    return cur.coeffs[0]


def _relative_cofactor(tower, a, level):
    """a^-1 * N_{K_level/K_{level-1}}(a) = product of the other conjugates."""
    ks = _relative_galois(tower, level)
    prod = None
    for k in ks:
        if k == 1:
            continue
        term = galois_apply(a, k)
        prod = term if prod is None else ring_mul(prod, term)
    if prod is None:  # relative degree 1 cannot happen in a tower
        return fe_one(a.f)
    return prod


def g_euclide(tower, a, b, level=None, rng=None, prec_margin=64):
    """u, v in O_{K_level} with a*u + b*v = 1, given coprime absolute norms.

    Descends through relative norms, multiplies the recursive solution back
    by the conjugate cofactors, and size-reduces the 2x2 completion to keep
    coefficient growth at one size-reduction of the input bitsize.
    """
    level = tower.level_of(a.f) if level is None else level
    if level == 0:
        u, v = ex_gcd(a.coeffs[0], b.coeffs[0])
        return FieldElement(1, (u,)), FieldElement(1, (v,))
    if a.is_zero() or b.is_zero():
        raise NotCoprimeNorms("zero operand")
    na = relative_norm(tower, a, level)
    nb = relative_norm(tower, b, level)
    try:
        mu, nu = g_euclide(tower, na, nb, level - 1, rng=rng, prec_margin=prec_margin)
    except NotCoprime:
        raise NotCoprimeNorms("absolute norms share a factor")
    u0 = ring_mul(lift_to_level(tower, mu, level), _relative_cofactor(tower, a, level))
    v0 = ring_mul(lift_to_level(tower, nu, level), _relative_cofactor(tower, b, level))
    # a*u0 + b*v0 = lift(mu*N(a) + nu*N(b)) = 1
    W = [[a, fe_zero(a.f) - v0], [b, u0]]
    # det W = 1: the second pivot is ~2^-bits(col1) while entries reach
    # 2^bits(col2), so the working precision must span both
    bits1 = max(a.max_coeff_bits(), b.max_coeff_bits(), 1)
    bits2 = max(u0.max_coeff_bits(), v0.max_coeff_bits(), 1)
    rng = rng or Rng("g-euclide")
    from .errors import RankDeficient

    p = bits1 + bits2 + prec_margin
    for _ in range(4):
        try:
            R = orthogonalize(W, a.f, p)
            break
        except RankDeficient:
            p *= 2
    else:
        raise
    res = size_reduce(R, rng=rng.derive(f"lvl{level}"), update_r=True)
    V = res.transform
    X = mat_mul(W, V)
    # the (1,1) entry of V is the unit dilation applied to column 1
    d_exps = None
    for col, exps in res.unit_exponents:
        if col == 1:
            d_exps = exps
    if d_exps is None:
        v11_inv = fe_one(a.f)
    else:
        v11_inv = exact_unit(
            UnitExponents(a.f, tuple((e, z) for e, z in d_exps.families)), a.f
        )
    # a*X22 - b*X12 = V11, a unit; rescale to a true Bezout pair
    u = ring_mul(X[1][1], v11_inv)
    v = fe_zero(a.f) - ring_mul(X[0][1], v11_inv)
    return u, v


def _combination_weights(cap):
    """Deterministic ascending-weight scan over the first two columns."""
    out = []
    seen = set()
    for radius in (1, 2):
        for w1 in range(-radius, radius + 1):
            for w2 in range(-radius, radius + 1):
                if (w1, w2) == (0, 0) or (w1, w2) in seen:
                    continue
                seen.add((w1, w2))
                out.append((abs(w1) + abs(w2), w1 != 1, w1, w2))
    out.sort()
    return [(w1, w2) for _, _, w1, w2 in out][:cap]


def lift(tower, uprime, level, candidates=LIFT_DEFAULT_CANDIDATES, rng=None):
    """Complete a short vector of the descended module into a 2x2 transform.

    Scans small integer combinations of the first two columns of the
    unimodular input, ascends each to (a, b) over K_level, and returns
    [[a, -v], [b, u]] with det 1 from the first coprime-norm success.
    """
    m = len(uprime)
    f_dn = uprime[0][0].f
    col1 = [uprime[r][0] for r in range(m)]
    col2 = [uprime[r][1] for r in range(m)] if m > 1 else [fe_zero(f_dn)] * m
    tried = 0
    for w1, w2 in _combination_weights(candidates):
        if tried >= candidates:
            break
        tried += 1
        vec = [w1 * col1[r] + w2 * col2[r] for r in range(m)]
        if all(x.is_zero() for x in vec):
            continue
        ab = ascend(tower, vec, level)
        if len(ab) != 2:
            raise LiftFailed("descended vector does not ascend to rank 2")
        a, b = ab
        if a.is_zero() or b.is_zero():
            continue
        na = tower_absolute_norm(tower, a, level)
        nb = tower_absolute_norm(tower, b, level)
        if math.gcd(na, nb) != 1:
            continue
        u, v = g_euclide(tower, a, b, level, rng=rng)
        U = [[a, fe_zero(a.f) - v], [b, u]]
        return U
    raise LiftFailed(f"no coprime-norm combination among {tried} candidates")
