"""Cyclotomic towers, exact field arithmetic, and the descend/ascend
rank-degree conversions.

A tower is a chain Q = K_0 < K_1 < ... < K_h of cyclotomic fields with
dividing conductors.  Elements are stored in the power basis of their
conductor; exact elements carry integer (or Fraction) coefficients and all
ring operations on them are exact.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import polyring
from .errors import BadLength, BottomLevel, LevelMismatch, NotLogSmooth
from .polyring import (
    apply_automorphism,
    conjugate_coeffs,
    coprime_residues,
    euler_phi,
    is_log_smooth,
    prime_factors,
    ring_mul_coeffs,
)


@dataclass(frozen=True)
class FieldElement:
    """Element of O_{K} (or K, with Fraction coefficients) in the power basis."""

    f: int
    coeffs: tuple

    def __post_init__(self):
        n = euler_phi(self.f)
        if len(self.coeffs) != n:
            raise BadLength(f"need {n} coefficients for conductor {self.f}")

    @property
    def degree(self):
        return euler_phi(self.f)

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def is_rational(self):
        return all(c == 0 for c in self.coeffs[1:])

    def __add__(self, other):
        _check_level(self, other)
        return FieldElement(self.f, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        _check_level(self, other)
        return FieldElement(self.f, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return FieldElement(self.f, tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, int):
            return FieldElement(self.f, tuple(c * other for c in self.coeffs))
        _check_level(self, other)
        return ring_mul(self, other)

    __rmul__ = __mul__

    def conj(self):
        return FieldElement(self.f, tuple(conjugate_coeffs(list(self.coeffs), self.f)))

    def max_coeff_bits(self):
        return max((abs(int(c)).bit_length() for c in self.coeffs), default=0)


def _check_level(a, b):
    if a.f != b.f:
        raise LevelMismatch(f"conductors {a.f} and {b.f} differ")


def fe_zero(f):
    return FieldElement(f, (0,) * euler_phi(f))


def fe_one(f):
    n = euler_phi(f)
    return FieldElement(f, (1,) + (0,) * (n - 1))


def fe_int(f, c):
    n = euler_phi(f)
    return FieldElement(f, (c,) + (0,) * (n - 1))


def fe_x(f, power=1):
    """x^power mod Phi_f as a field element."""
    coeffs = polyring.reduce_mod_cyclotomic([0] * power + [1], f)
    return FieldElement(f, tuple(coeffs))


def ring_mul(a, b):
    """Exact product in Z[x]/(Phi_f).  Inputs must share a conductor."""
    _check_level(a, b)
    return FieldElement(a.f, tuple(ring_mul_coeffs(a.coeffs, b.coeffs, a.f)))


def galois_apply(a, k):
    return FieldElement(a.f, tuple(apply_automorphism(list(a.coeffs), k, a.f)))


def absolute_norm(a):
    """N_{K/Q}(a), exact."""
    if a.f == 1:
        return a.coeffs[0]
    return polyring.galois_norm_coeffs(list(a.coeffs), a.f)


def absolute_trace(a):
    """tr_{K/Q}(a), exact, via Ramanujan sums."""
    return sum(c * ramanujan_sum(a.f, j) for j, c in enumerate(a.coeffs))


@lru_cache(maxsize=None)
def _moebius(n):
    if n == 1:
        return 1
    m, v = 1, n
    for p in prime_factors(n):
        if v % (p * p) == 0:
            return 0
        m = -m
    return m


@lru_cache(maxsize=None)
def ramanujan_sum(f, t):
    """c_f(t) = sum over k coprime to f of zeta_f^{tk}, an integer."""
    g = math.gcd(t % f if f > 1 else 0, f)
    d = f // g if f > 1 else 1
    mu = _moebius(d)
    if mu == 0:
        return 0
    return mu * (euler_phi(f) // euler_phi(d))


def t2_norm_sq(a):
    """tr_{K/Q}(a * conj(a)): the squared canonical norm, exact."""
    prod = ring_mul(a, a.conj())
    return absolute_trace(prod)


# ---------------------------------------------------------------------------
# Tower


@dataclass(frozen=True)
class Tower:
    """Chain of cyclotomic fields with per-level reduction parameters."""

    conductors: tuple
    alpha_schedule: tuple
    epsilon: Fraction
    base_degree: int

    def __post_init__(self):
        fs = self.conductors
        if fs[0] != 1:
            raise ValueError("towers start at Q (conductor 1)")
        for lo, hi in zip(fs, fs[1:]):
            if hi % lo != 0 or euler_phi(hi) <= euler_phi(lo):
                raise ValueError("conductors must divide with increasing degrees")

    @property
    def height(self):
        return len(self.conductors) - 1

    @property
    def degrees(self):
        return tuple(euler_phi(f) for f in self.conductors)

    @property
    def relative_degrees(self):
        deg = self.degrees
        return (1,) + tuple(deg[i] // deg[i - 1] for i in range(1, len(deg)))

    def level_of(self, f):
        try:
            return self.conductors.index(f)
        except ValueError:
            raise LevelMismatch(f"conductor {f} not in tower {self.conductors}")

    def alpha(self, level):
        return self.alpha_schedule[level]

    def base_level(self):
        """Deepest level at which rank-2 reduction dispatches to a base case."""
        deg = self.degrees
        lvl = 0
        for i, n in enumerate(deg):
            if n <= self.base_degree:
                lvl = i
        return lvl

    def subtower(self, level):
        """Tower truncated at `level` (same schedule below it)."""
        return Tower(
            conductors=self.conductors[: level + 1],
            alpha_schedule=self.alpha_schedule[: level + 1],
            epsilon=self.epsilon,
            base_degree=self.base_degree,
        )


def default_alpha_schedule(height):
    """alpha_i = 4^(h-i+1): larger (looser) triggers deeper in the tower."""
    return tuple(Fraction(4) ** (height - i + 1) for i in range(height + 1))


def build_tower(conductor, base_degree=16, epsilon=Fraction(1, 2), alpha_schedule=None,
                conductors=None, allow_non_log_smooth=False):
    """Select a chain of cyclotomic subfields below `conductor`.

    Power-of-two conductors descend by relative degree 2; otherwise the
    chain is chosen greedily so that each relative degree r satisfies
    r / n^(1/5) in [1, log2 f] whenever such a divisor exists.
    An explicit `conductors` chain overrides the policy.
    """
    if conductor < 1:
        raise ValueError("conductor must be positive")
    if not allow_non_log_smooth and not is_log_smooth(conductor):
        raise NotLogSmooth(f"{conductor} has a prime factor above log2 bound")

    if conductors is None:
        conductors = _select_chain(conductor)
    conductors = tuple(conductors)
    if conductors and conductors[-1] != conductor:
        raise ValueError("chain must end at the requested conductor")
    h = len(conductors) - 1
    if alpha_schedule is None:
        alpha_schedule = default_alpha_schedule(h)
    return Tower(conductors=conductors, alpha_schedule=tuple(alpha_schedule),
                 epsilon=epsilon, base_degree=base_degree)


def _select_chain(f):
    if f == 1:
        return (1,)
    chain = [f]
    cur = f
    logf = max(1.0, math.log2(f))
    while cur > 1:
        n_cur = euler_phi(cur)
        if n_cur == 1:
            chain.append(1)
            break
        divisors = sorted(d for d in range(1, cur) if cur % d == 0 and euler_phi(d) < n_cur)
        if cur & (cur - 1) == 0:
            # power of two: halve the degree each step
            target = [d for d in divisors if 2 * euler_phi(d) == n_cur]
            nxt = target[-1] if target else 1
        else:
            best = None
            for d in reversed(divisors):
                r = n_cur // euler_phi(d)
                if n_cur % euler_phi(d) != 0:
                    continue
                ratio = r / (n_cur ** 0.2)
                if 1.0 <= ratio <= logf:
                    best = d
                    break
            if best is None:
                # fall back to the largest proper subfield
                best = divisors[-1] if divisors else 1
            nxt = best
        chain.append(nxt)
        cur = nxt
    if chain[-1] != 1:
        chain.append(1)
    # drop redundant degree-1 conductors (e.g. 2) except the leading 1
    chain = [c for c in chain if c == 1 or euler_phi(c) > 1]
    return tuple(reversed(chain))


# ---------------------------------------------------------------------------
# Relative norm / trace / descend / ascend


def _relative_galois(tower, level):
    """Residues k with sigma_k fixing K_{level-1}, acting on K_level."""
    f = tower.conductors[level]
    f_dn = tower.conductors[level - 1]
    return tuple(k for k in coprime_residues(f) if (k % f_dn) == (1 % f_dn))


def relative_norm(tower, a, level=None):
    """N_{K_i/K_{i-1}}(a): product of the conjugates fixing the subfield."""
    level = tower.level_of(a.f) if level is None else level
    if level == 0:
        raise BottomLevel("no subfield below Q")
    prod = None
    for k in _relative_galois(tower, level):
        term = a if k == 1 else galois_apply(a, k)
        prod = term if prod is None else ring_mul(prod, term)
    return _restrict_to_subfield(tower, prod, level)


def relative_trace(tower, a, level=None):
    level = tower.level_of(a.f) if level is None else level
    if level == 0:
        raise BottomLevel("no subfield below Q")
    acc = None
    for k in _relative_galois(tower, level):
        term = a if k == 1 else galois_apply(a, k)
        acc = term if acc is None else acc + term
    return _restrict_to_subfield(tower, acc, level)


@lru_cache(maxsize=None)
def _descent_data(f, f_dn):
    """Basis data for O_{K} over O_{K'}: either an aligned index map or an
    exact change-of-basis matrix (as Fractions)."""
    n, n_dn = euler_phi(f), euler_phi(f_dn)
    q = n // n_dn
    stride = f // f_dn
    if stride == q:
        return ("aligned", q)
    # columns: x^t * zeta'^s in the power basis of K, t < q, s < n_dn
    cols = []
    for s in range(n_dn):
        for t in range(q):
            e = t + stride * s
            coeffs = polyring.reduce_mod_cyclotomic([0] * e + [1], f)
            cols.append([Fraction(c) for c in coeffs])
    # invert the n x n matrix whose columns are `cols`
    mat = [[cols[j][i] for j in range(n)] for i in range(n)]
    inv = _fraction_inverse(mat)
    return ("matrix", q, tuple(tuple(row) for row in inv))


def _fraction_inverse(mat):
    n = len(mat)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [v * inv_p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def subfield_coords(tower, a, level=None):
    """Coordinates of a in the basis 1, x, ..., x^(q-1) over K_{level-1}.

    Returns a list of q FieldElements at level-1.
    """
    level = tower.level_of(a.f) if level is None else level
    if level == 0:
        raise BottomLevel("no subfield below Q")
    f, f_dn = tower.conductors[level], tower.conductors[level - 1]
    n_dn = euler_phi(f_dn)
    data = _descent_data(f, f_dn)
    q = data[1]
    if data[0] == "aligned":
        out = []
        for t in range(q):
            out.append(FieldElement(f_dn, tuple(a.coeffs[t + q * s] for s in range(n_dn))))
        return out
    inv = data[2]
    n = euler_phi(f)
    vec = [sum(inv[i][j] * a.coeffs[j] for j in range(n)) for i in range(n)]
    out = []
    for t in range(q):
        comp = []
        for s in range(n_dn):
            v = vec[t + q * s]
            if isinstance(v, Fraction) and v.denominator == 1:
                v = int(v)
            comp.append(v)
        out.append(FieldElement(f_dn, tuple(comp)))
    return out


def _restrict_to_subfield(tower, a, level):
    """Element known to lie in K_{level-1}: return it at the lower level."""
    coords = subfield_coords(tower, a, level)
    for c in coords[1:]:
        if not c.is_zero():
            raise ValueError("element does not lie in the subfield")
    return coords[0]


def lift_to_level(tower, a, level):
    """Embed an element of K_{level-1} into K_level (y -> x^(f/f'))."""
    f, f_dn = tower.conductors[level], tower.conductors[level - 1]
    stride = f // f_dn
    acc = [0] * f
    for s, c in enumerate(a.coeffs):
        acc[(stride * s) % f] += c
    return FieldElement(f, tuple(polyring.reduce_mod_cyclotomic(acc, f)))


def ascend_vector(tower, coords, level):
    """Inverse of subfield_coords on vectors: q components -> one element."""
    f = tower.conductors[level]
    q = tower.relative_degrees[level]
    if len(coords) != q:
        raise BadLength(f"need {q} coordinates")
    acc = fe_zero(f)
    for t, c in enumerate(coords):
        acc = acc + ring_mul(lift_to_level(tower, c, level), fe_x(f, t))
    return acc


def descend_vector(tower, vec, level=None):
    """Vector over K_level (length d) -> vector over K_{level-1} (length d*q),
    component-major."""
    level = tower.level_of(vec[0].f) if level is None else level
    out = []
    for comp in vec:
        out.extend(subfield_coords(tower, comp, level))
    return out


def ascend(tower, vec, level):
    """Vector over K_{level-1} of length d*q -> vector over K_level of length d."""
    q = tower.relative_degrees[level]
    if len(vec) % q != 0:
        raise BadLength(f"length {len(vec)} not divisible by {q}")
    out = []
    for i in range(0, len(vec), q):
        out.append(ascend_vector(tower, vec[i : i + q], level))
    return out


def multiplication_matrix(tower, a, level=None):
    """q x q matrix over K_{level-1} of multiplication by `a` in the
    relative power basis."""
    level = tower.level_of(a.f) if level is None else level
    f = tower.conductors[level]
    q = tower.relative_degrees[level]
    cols = []
    for t in range(q):
        cols.append(subfield_coords(tower, ring_mul(a, fe_x(f, t)), level))
    # entry (row r, col t) = r-th coordinate of a * x^t
    return [[cols[t][r] for t in range(q)] for r in range(q)]


def descend_matrix(tower, M, level=None):
    """d x d matrix over K_level -> (dq) x (dq) matrix over K_{level-1}.

    Blocks are multiplication matrices, so descend is a ring homomorphism
    on endomorphisms and descend(M) acts on descend_vector coordinates.
    """
    level = tower.level_of(M[0][0].f) if level is None else level
    q = tower.relative_degrees[level]
    d = len(M)
    out = [[None] * (d * q) for _ in range(d * q)]
    for bi in range(d):
        for bj in range(len(M[0])):
            block = multiplication_matrix(tower, M[bi][bj], level)
            for r in range(q):
                for c in range(q):
                    out[bi * q + r][bj * q + c] = block[r][c]
    return out
