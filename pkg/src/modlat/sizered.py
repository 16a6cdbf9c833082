"""Size reduction with unit dilations, Seysen's recursive size reduction,
and triangular inversion.

Transforms are exact matrices over O_K built from shears T_ij(mu) and unit
dilations D_i(u); |N(det U)| = 1 always, and the R diagonal's algebraic
norms never change.
"""

import mpmath
from mpmath import mpc, mpf

from . import embed as embed_mod
from . import units as units_mod
from .embed import EmbeddedVector, workprec
from .errors import PrecisionExhausted
from .exactmat import col_scale, col_sub, mat_identity, mat_mul
from .ortho import EmbeddedMatrix, RFactor
from .polyring import euler_phi
from .tower import FieldElement

SIZERED_MIN_UNIT_DEGREE = 4  # fields of degree <= 2 have only torsion units


class SizeReduceResult:
    __slots__ = ("transform", "unit_exponents")

    def __init__(self, transform, unit_exponents):
        self.transform = transform
        self.unit_exponents = unit_exponents


def _round_entry_to_field(ev, f, wp):
    """Coefficient-wise integral rounding (half-to-even) in the power basis."""
    coeffs = embed_mod.unembed_fft(EmbeddedVector(f, ev.values, wp), wp)
    n = euler_phi(f)
    ints = tuple(int(mpmath.nint(c)) for c in coeffs)
    if all(c == 0 for c in ints):
        return None
    return FieldElement(f, ints)


def size_reduce(R, rng=None, use_units=True, update_r=True):
    """Alg.-style size reduction of an upper-triangular R-factor.

    Per column: a dilation by Unit(R_ii)^-1 balances the diagonal's
    embeddings, then shears remove the rounded quotients R_ji / R_jj.
    Mutates R's slots when update_r is set and returns the exact transform.
    """
    f, p, d = R.f, R.prec, R.dim
    n = euler_phi(f)
    U = mat_identity(d, f)
    unit_log = []
    do_units = use_units and n >= SIZERED_MIN_UNIT_DEGREE and rng is not None
    wp = p + max(1, n.bit_length()) + 8
    with workprec(wp):
        for i in range(d):
            if do_units:
                diag = R.entry(i, i)
                col_rng = rng.derive(f"sizered-col-{i}")
                try:
                    exps, _ = units_mod.unit_round(
                        EmbeddedVector(f, diag.values, p), col_rng
                    )
                except units_mod.RetryExhausted:
                    exps = units_mod.UnitExponents(f, ())
                if not exps.is_trivial():
                    neg = units_mod.UnitExponents(
                        f, tuple((e, tuple(-c for c in z)) for e, z in exps.families)
                    )
                    u_inv = units_mod.exact_unit(neg, f, hint_prec=p)
                    vals_inv = units_mod.unit_embedding_values(neg, f, p)
                    col_scale(U, i, u_inv)
                    if update_r:
                        for k, s in enumerate(R.slots):
                            w = vals_inv[k]
                            for r in range(i + 1):
                                s[r][i] = s[r][i] * w
                    unit_log.append((i, exps))
            for j in range(i - 1, -1, -1):
                quot_vals = []
                for s in R.slots:
                    denom = s[j][j]
                    if denom == 0:
                        raise PrecisionExhausted("zero diagonal during size reduction")
                    quot_vals.append(s[j][i] / denom)
                mu = _round_entry_to_field(
                    EmbeddedVector(f, tuple(quot_vals), wp), f, wp
                )
                if mu is None:
                    continue
                col_sub(U, i, j, mu)
                if update_r:
                    mu_emb = embed_mod.embed_fft(list(mu.coeffs), f, wp)
                    for k, s in enumerate(R.slots):
                        w = mu_emb.values[k]
                        for r in range(j + 1):
                            if s[r][j] != 0:
                                s[r][i] = s[r][i] - w * s[r][j]
    if update_r:
        R.diag_log2 = _recompute_diag(R)
    return SizeReduceResult(U, tuple(unit_log))


def _recompute_diag(R):
    from .ortho import _diag_log2

    return _diag_log2(R.slots, R.f)


# ---------------------------------------------------------------------------
# Seysen size reduction (divide and conquer)


def invert_triangular_slot(r):
    """[[A', -A'BC'], [0, C']] recursion on one complex triangular slot."""
    d = len(r)
    if d == 1:
        return [[1 / r[0][0]]]
    h = d // 2
    a = [[r[i][j] for j in range(h)] for i in range(h)]
    b = [[r[i][j] for j in range(h, d)] for i in range(h)]
    c = [[r[i][j] for j in range(h, d)] for i in range(h, d)]
    ai = invert_triangular_slot(a)
    ci = invert_triangular_slot(c)
    from .ortho import _matmul

    abc = _matmul(_matmul(ai, b), ci)
    out = [[mpc(0)] * d for _ in range(d)]
    for i in range(h):
        for j in range(h):
            out[i][j] = ai[i][j]
        for j in range(d - h):
            out[i][h + j] = -abc[i][j]
    for i in range(d - h):
        for j in range(d - h):
            out[h + i][h + j] = ci[i][j]
    return out


def invert_unitriangular(M, p=None):
    """Approximate inverse of a (unit)triangular EmbeddedMatrix, slotwise,
    with ||M' - M^-1|| <= 2^-p under the theorem's preconditions."""
    p = M.prec if p is None else p
    with workprec(2 * p + max(1, M.cols.bit_length()) + 8):
        slots = [invert_triangular_slot(s) for s in M.slots]
    return EmbeddedMatrix(M.f, slots, p)


def seysen_size_reduce(R, return_inverse=False):
    """Seysen's recursive size reduction of a triangular R-factor.

    Returns the exact integer (unitriangular over O_K) transform U; with
    return_inverse also the slotwise approximate inverse of R U.  The
    recursion splits in halves, reduces both, then rounds A^-1 B.
    """
    f, p = R.f, R.prec
    d = R.dim
    wp = p + max(1, euler_phi(f).bit_length()) + 8
    with workprec(wp):
        u_exact, slots_inv = _seysen_rec(R.slots, f, wp)
    if return_inverse:
        return u_exact, EmbeddedMatrix(f, slots_inv, p)
    return u_exact


def _seysen_rec(slots, f, wp):
    d = len(slots[0])
    if d == 1:
        one = mat_identity(1, f)
        return one, [[[1 / s[0][0]]] for s in slots]
    h = d // 2
    a_slots = [[[s[i][j] for j in range(h)] for i in range(h)] for s in slots]
    b_slots = [[[s[i][j] for j in range(h, d)] for i in range(h)] for s in slots]
    c_slots = [[[s[i][j] for j in range(h, d)] for i in range(h, d)] for s in slots]
    u1, a_inv = _seysen_rec(a_slots, f, wp)
    u2, c_inv = _seysen_rec(c_slots, f, wp)
    from .ortho import _matmul

    # W = round(A' B U2) where A' = (A U1)^-1
    u2_emb = _embed_exact(u2, f, wp)
    w_entries = [[None] * (d - h) for _ in range(h)]
    prod_slots = []
    for k in range(len(slots)):
        bu2 = _matmul(b_slots[k], u2_emb[k])
        prod_slots.append(_matmul(a_inv[k], bu2))
    for i in range(h):
        for j in range(d - h):
            ev = EmbeddedVector(f, tuple(ps[i][j] for ps in prod_slots), wp)
            w_entries[i][j] = _round_entry_to_field(ev, f, wp)
    # assemble U = [[U1, -U1 W], [0, U2]]
    from .tower import fe_zero, ring_mul

    U = mat_identity(d, f)
    for i in range(h):
        for j in range(h):
            U[i][j] = u1[i][j]
    for i in range(d - h):
        for j in range(d - h):
            U[h + i][h + j] = u2[i][j]
    for i in range(h):
        for j in range(d - h):
            acc = fe_zero(f)
            for t in range(h):
                wt = w_entries[t][j]
                if wt is not None and not u1[i][t].is_zero():
                    acc = acc + ring_mul(u1[i][t], wt)
            U[i][h + j] = fe_zero(f) - acc
    # inverse of the reduced matrix: [[A', -A'(BU2 - AU1 W)C'], [0, C']]
    u_emb = _embed_exact(U, f, wp)
    inv_slots = []
    for k in range(len(slots)):
        red = _matmul(slots[k], u_emb[k])
        inv_slots.append(invert_triangular_slot(red))
    return U, inv_slots


def _embed_exact(M, f, wp):
    """Slot matrices of an exact matrix at working precision."""
    nslot = max(1, euler_phi(f) // 2)
    m, d = len(M), len(M[0])
    out = [[[None] * d for _ in range(m)] for _ in range(nslot)]
    for i in range(m):
        for j in range(d):
            ev = embed_mod.embed_fft(list(M[i][j].coeffs), f, wp)
            for k in range(nslot):
                out[k][i][j] = ev.values[k]
    return out
