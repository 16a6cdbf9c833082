"""Cyclotomic units: log embedding, randomized unit rounding, BDD decoding.

The unit group modulo torsion is handled through the group ring R[G] with
G = (Z/fZ)^x / {+-1}.  Log vectors are even functions on H = (Z/fZ)^x;
multiplication and division by Log(zeta_f^e - 1) happen in the character
(Fourier) domain of H, where even characters carry all the information.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
from mpmath import mp, mpc, mpf

from . import embed as embed_mod
from .embed import EmbeddedVector, embedding_indices, workprec
from .errors import DecodeFailed, NearZeroEmbedding, PrecisionExhausted, RetryExhausted
from .polyring import coprime_residues, euler_phi, prime_factors
from .tower import FieldElement

LOG_GUARD = 8


@dataclass(frozen=True)
class LogVector:
    """log |sigma_k(x)| on the conjugate-pair representatives (base-e logs)."""

    f: int
    entries: tuple
    prec: int


@dataclass(frozen=True)
class UnitExponents:
    """A cyclotomic unit prod_{(e, z)} prod_alpha sigma_alpha(zeta_f^e - 1)^z_alpha.

    Exponent vectors are indexed by the representatives of G; families with
    f/e a prime power satisfy sum(z) = 0 (augmentation ideal).
    """

    f: int
    families: tuple  # tuple of (e, tuple_of_ints)

    def is_trivial(self):
        return all(all(c == 0 for c in z) for _, z in self.families)


# ---------------------------------------------------------------------------
# structure of (Z/fZ)^x


def _primitive_root(q, p):
    """Primitive root modulo the odd prime power q = p^e."""
    phi = euler_phi(q)
    fac = prime_factors(phi)
    g = 2
    while True:
        if math.gcd(g, q) == 1 and all(pow(g, phi // r, q) != 1 for r in fac):
            return g
        g += 1


@lru_cache(maxsize=None)
def unit_group_structure(f):
    """Generators, orders and discrete logs of H = (Z/fZ)^x.

    Returns (axes, dlog) where axes is a tuple of (generator, order) and
    dlog maps each residue to its coordinate tuple.
    """
    if f <= 2:
        return ((), {1 % max(f, 1): ()})
    facs = []
    m = f
    for p in prime_factors(f):
        q = 1
        while m % p == 0:
            q *= p
            m //= p
        facs.append((p, q))
    gens = []
    for p, q in facs:
        others = f // q
        if p == 2:
            if q == 2:
                continue
            if q == 4:
                gens.append((_crt_lift(3, q, others), 2))
            else:
                gens.append((_crt_lift(q - 1, q, others), 2))
                gens.append((_crt_lift(5, q, others), q // 4))
        else:
            gens.append((_crt_lift(_primitive_root(q, p), q, others), euler_phi(q)))
    axes = tuple(gens)
    dlog = {}
    coords = [0] * len(axes)
    total = 1
    for _, o in axes:
        total *= o

    def rec(i, acc):
        if i == len(axes):
            dlog[acc] = tuple(coords)
            return
        g, order = axes[i]
        cur = acc
        for t in range(order):
            coords[i] = t
            rec(i + 1, cur)
            cur = (cur * g) % f
        coords[i] = 0

    rec(0, 1)
    assert len(dlog) == euler_phi(f)
    return axes, dlog


def _crt_lift(a, q, others):
    """Residue congruent to a mod q and 1 mod others."""
    if others == 1:
        return a % q
    inv_others = pow(others, -1, q)
    inv_q = pow(q, -1, others)
    x = (a * others * inv_others + 1 * q * inv_q) % (q * others)
    return x


class GroupFourier:
    """Fourier transform over H = (Z/fZ)^x at a given precision."""

    def __init__(self, f, prec):
        self.f = f
        self.prec = prec
        self.axes, self.dlog = unit_group_structure(f)
        self.size = euler_phi(f)
        self.residues = sorted(self.dlog.keys())
        self.strides = []
        s = 1
        for _, o in reversed(self.axes):
            self.strides.append(s)
            s *= o
        self.strides.reverse()
        with workprec(prec + LOG_GUARD):
            self.axis_roots = []
            for _, o in self.axes:
                tab = embed_mod._root_powers(o, prec + LOG_GUARD) if o > 1 else (mpc(1),)
                self.axis_roots.append(tab)

    def flat_index(self, residue):
        c = self.dlog[residue]
        return sum(t * s for t, s in zip(c, self.strides))

    def to_flat(self, values_by_residue):
        out = [mpc(0)] * self.size
        for r, v in values_by_residue.items():
            out[self.flat_index(r)] = mpc(v)
        return out

    def _axis_dft(self, vec, axis, inverse):
        _, order = self.axes[axis]
        if order == 1:
            return list(vec)
        stride = self.strides[axis]
        roots = self.axis_roots[axis]
        out = list(vec)
        block = order * stride
        for base in range(0, self.size, block):
            for off in range(stride):
                idxs = [base + off + t * stride for t in range(order)]
                col = [vec[i] for i in idxs]
                for t in range(order):
                    acc = mpc(0)
                    for j in range(order):
                        w = roots[(j * t) % order]
                        acc += col[j] * (w.conjugate() if inverse else w)
                    if inverse:
                        acc /= order
                    out[idxs[t]] = acc
        return out

    def dft(self, flat, inverse=False):
        with workprec(self.prec + LOG_GUARD):
            cur = list(flat)
            for ax in range(len(self.axes)):
                cur = self._axis_dft(cur, ax, inverse)
            return cur

    def invert_char_index(self, idx):
        """Index of the inverse character (negated coordinates)."""
        out = 0
        for (_, o), s in zip(self.axes, self.strides):
            t = (idx // s) % o
            out += ((-t) % o) * s
        return out


@lru_cache(maxsize=32)
def _fourier(f, prec):
    return GroupFourier(f, prec)


def _even_flat(gf, grep_values, f):
    """Extend a G-indexed vector to an even function on H (flat layout)."""
    flat = [mpc(0)] * gf.size
    reps = embedding_indices(f)
    for k, v in zip(reps, grep_values):
        flat[gf.flat_index(k)] = mpc(v)
        if f - k != k and math.gcd(f - k, f) == 1:
            flat[gf.flat_index(f - k)] = mpc(v)
    return flat


def _restrict_to_reps(gf, flat, f):
    reps = embedding_indices(f)
    return [flat[gf.flat_index(k)].real for k in reps]


def group_convolve(f, z, w, prec):
    """Class convolution over G: (z * w)(beta) = sum_{alpha in G} z_a w(beta a).

    Both vectors are indexed by the conjugate-pair representatives; the
    computation extends them evenly to H where convolution is diagonal in
    the character domain (with a factor 1/2 for the +-1 quotient).
    """
    gf = _fourier(f, prec)
    fz = gf.dft(_even_flat(gf, z, f))
    fw = gf.dft(_even_flat(gf, w, f))
    with workprec(prec + LOG_GUARD):
        half = mpf(1) / 2
        prod = [mpc(0)] * gf.size
        for i in range(gf.size):
            prod[i] = fz[gf.invert_char_index(i)] * fw[i] * half
        res = gf.dft(prod, inverse=True)
    return _restrict_to_reps(gf, res, f)


def group_divide(f, w, b, prec, support_tol=None):
    """Solve (class) z * b = w for z over R[G]; characters where b vanishes
    are projected out (the norm direction is removed by normalization)."""
    gf = _fourier(f, prec)
    fw = gf.dft(_even_flat(gf, w, f))
    fb = gf.dft(_even_flat(gf, b, f))
    tol = mpf(2) ** (-(prec // 2)) if support_tol is None else support_tol
    with workprec(prec + LOG_GUARD):
        quot = [mpc(0)] * gf.size
        for i in range(gf.size):
            ii = gf.invert_char_index(i)
            if abs(fb[ii]) > tol:
                quot[i] = 2 * fw[ii] / fb[ii]
        res = gf.dft(quot, inverse=True)
    return _restrict_to_reps(gf, res, f)


# ---------------------------------------------------------------------------
# Log embedding


def log_embed(x, p=None):
    """Coefficient-wise log |sigma_k(x)|; raises on near-zero embeddings."""
    if isinstance(x, FieldElement):
        x = embed_mod.embed_fft(list(x.coeffs), x.f, p or 64 + x.max_coeff_bits())
    p = x.prec if p is None else p
    with workprec(p + LOG_GUARD):
        floor = mpf(2) ** (-p)
        out = []
        for v in x.values:
            m = abs(v)
            if m <= floor:
                raise NearZeroEmbedding("log of near-zero embedding")
            out.append(mpmath.log(m))
        return LogVector(x.f, tuple(out), p)


@lru_cache(maxsize=64)
def log_zeta_power_minus_one(f, e, prec):
    """Log(zeta_f^e - 1) on the G representatives: log |2 sin(pi k e / f)|."""
    with workprec(prec + LOG_GUARD):
        out = []
        for k in embedding_indices(f):
            t = (k * e) % f
            assert t != 0
            out.append(mpmath.log(2 * abs(mpmath.sinpi(mpf(t) / f))))
        return tuple(out)


def _divisor_products(f):
    """The set Q of products of the maximal prime-power divisors of f."""
    qs = []
    for p in prime_factors(f):
        q = 1
        m = f
        while m % p == 0:
            q *= p
            m //= p
        qs.append(q)
    prods = [1]
    for q in qs:
        prods += [x * q for x in prods]
    return sorted(prods)


# ---------------------------------------------------------------------------
# randomized unit rounding


def _randomized_round(y, rng):
    """z in {floor(y), ceil(y)} with expectation y (deterministic if integral)."""
    fl = math.floor(y)
    frac = y - fl
    if frac == 0:
        return fl
    return fl + 1 if rng.coin(float(frac)) else fl


def unit_round(x, rng, max_retries=None, gate_scale=1.0):
    """Balance the embeddings of x by a cyclotomic unit (randomized).

    Returns (exponents, balanced) where balanced = embeddings of x * u^-1.
    Retries the whole rounding while the Berry-Esseen gate
    |y_1 - z_1| <= sqrt(n)/log2(n) fails (prime-power conductors).
    """
    f, p = x.f, x.prec
    n = euler_phi(f)
    if n <= 2:
        return UnitExponents(f, ()), x
    if max_retries is None:
        max_retries = max(8, int(64 * math.log2(n)))

    logs = log_embed(x, p)
    if len(prime_factors(f)) == 1:
        return _unit_round_prime_power(x, logs, rng, max_retries, gate_scale)
    return _unit_round_general(x, logs, rng, max_retries)


def _norm_normalized(logs, f):
    """Subtract the mean so the vector is orthogonal to the norm direction."""
    m = sum(logs.entries) / len(logs.entries)
    return [v - m for v in logs.entries], m


def _unit_round_prime_power(x, logs, rng, max_retries, gate_scale):
    f, p = x.f, x.prec
    n = euler_phi(f)
    reps = embedding_indices(f)
    with workprec(p + LOG_GUARD):
        w, _ = _norm_normalized(logs, f)
        b = log_zeta_power_minus_one(f, 1, p)
        y = group_divide(f, w, b, p)
        gate = gate_scale * math.sqrt(n) / math.log2(n)
        idx1 = reps.index(1)
        for _ in range(max_retries):
            z = [0] * len(reps)
            for i in range(len(reps)):
                if i == idx1:
                    continue
                z[i] = _randomized_round(float(y[i]), rng)
            z[idx1] = -sum(z)
            if abs(float(y[idx1]) - z[idx1]) <= gate:
                exps = UnitExponents(f, ((1, tuple(z)),))
                return exps, apply_unit_inverse(x, exps)
        raise RetryExhausted(f"unit rounding gate failed {max_retries} times")


def _unit_round_general(x, logs, rng, max_retries):
    """Sequential Babai against the Log(zeta_f^e - 1) family.

    Character supports are claimed in decreasing order of e (the family's
    Gram-Schmidt structure: later vectors keep only fresh characters);
    the nearest-plane walk then rounds in increasing order of e.
    """
    f, p = x.f, x.prec
    reps = embedding_indices(f)
    gf = _fourier(f, p)
    with workprec(p + LOG_GUARD):
        w, _ = _norm_normalized(logs, f)
        es = [e for e in _divisor_products(f) if e != f]
        es.sort(reverse=True)
        tol = mpf(2) ** (-(p // 2))
        covered = set()
        plan = []  # (e, b, support) with disjoint supports
        for e in es:
            b = log_zeta_power_minus_one(f, e, p)
            fb = gf.dft(_even_flat(gf, b, f))
            support = frozenset(
                i for i in range(gf.size) if abs(fb[i]) > tol and i not in covered
            )
            if support:
                plan.append((e, b, support))
                covered |= support
        families = []
        residual = list(w)
        idx1 = reps.index(1)
        for e, b, support in reversed(plan):
            fb = gf.dft(_even_flat(gf, b, f))
            fw = gf.dft(_even_flat(gf, residual, f))
            quot = [mpc(0)] * gf.size
            for i in range(gf.size):
                ii = gf.invert_char_index(i)
                if ii in support:
                    quot[i] = 2 * fw[ii] / fb[ii]
            y = _restrict_to_reps(gf, gf.dft(quot, inverse=True), f)
            fe = f // e
            is_pp = len(prime_factors(fe)) == 1
            gate = math.sqrt(fe) / max(1.0, math.log2(fe))
            for attempt in range(max_retries):
                z = [_randomized_round(float(v), rng) for v in y]
                if is_pp:
                    z[idx1] = 0
                    z[idx1] = -sum(z)
                    if abs(float(y[idx1]) - z[idx1]) > gate and attempt + 1 < max_retries:
                        continue
                break
            families.append((e, tuple(z)))
            zb = group_convolve(f, z, b, p)
            residual = [r - c for r, c in zip(residual, zb)]
        exps = UnitExponents(f, tuple(families))
        return exps, apply_unit_inverse(x, exps)


def unit_embedding_values(exps, f, p):
    """Complex sigma_k(u) at the representatives, with phases."""
    with workprec(p + LOG_GUARD + 8):
        tab = embed_mod._root_powers(f, p + LOG_GUARD + 8)
        out = [mpc(1)] * len(embedding_indices(f))
        for e, z in exps.families:
            for i, k in enumerate(embedding_indices(f)):
                acc = mpc(1)
                for alpha, zc in zip(embedding_indices(f), z):
                    if zc == 0:
                        continue
                    base = tab[(k * alpha * e) % f] - 1
                    acc *= base**zc
                out[i] *= acc
        return tuple(out)


def apply_unit_inverse(x, exps):
    """Embeddings of x * u^-1."""
    if exps.is_trivial():
        return x
    vals = unit_embedding_values(exps, x.f, x.prec)
    with workprec(x.prec + LOG_GUARD):
        return EmbeddedVector(x.f, tuple(a / b for a, b in zip(x.values, vals)), x.prec)


def unit_log_vector(exps, f, p):
    """Log(u) on the representatives."""
    out = [mpf(0)] * len(embedding_indices(f))
    with workprec(p + LOG_GUARD):
        for e, z in exps.families:
            b = log_zeta_power_minus_one(f, e, p)
            zb = group_convolve(f, list(z), list(b), p)
            out = [a + c for a, c in zip(out, zb)]
    return LogVector(f, tuple(out), p)


def exact_unit(exps, f, hint_prec=None):
    """Power-basis integer coefficients of the unit, by unembedding at an
    adaptive precision and rounding; verified against the embeddings."""
    n = euler_phi(f)
    if exps.is_trivial():
        one = [0] * n
        one[0] = 1
        return FieldElement(f, tuple(one))
    p0 = hint_prec or 64
    for attempt in range(6):
        p = p0 * (2**attempt)
        vals = unit_embedding_values(exps, f, p + 2 * n)
        with workprec(p + 2 * n):
            maxlog = max(float(mpmath.log(abs(v), 2)) for v in vals)
            need = int(maxlog) + n.bit_length() + 48
            if p < need:
                continue
            ev = EmbeddedVector(f, vals, p)
            coeffs = embed_mod.unembed_fft(ev, p)
            ints = [int(mpmath.nint(c)) for c in coeffs]
            err = max(abs(c - i) for c, i in zip(coeffs, ints))
            if err < mpf(1) / 4:
                return FieldElement(f, tuple(ints))
    raise PrecisionExhausted("could not stabilize exact unit coefficients")


# ---------------------------------------------------------------------------
# BDD decoding on the log-unit lattice (power-of-two conductors)


def bdd_decode(x, residual_bound=0.25):
    """Recover the exponents of a unit from x = u * (small perturbation).

    Power-of-two conductors only: deterministic rounding of the group-ring
    quotient Log(x)/Log(zeta_f - 1) with the augmentation fix, verified by
    re-encoding; DecodeFailed signals an out-of-region perturbation.
    """
    f, p = x.f, x.prec
    if f & (f - 1) != 0 or f < 8:
        raise ValueError("BDD decoding requires a power-of-two conductor >= 8")
    n = euler_phi(f)
    reps = embedding_indices(f)
    logs = log_embed(x, p)
    with workprec(p + LOG_GUARD):
        w, _ = _norm_normalized(logs, f)
        b = log_zeta_power_minus_one(f, 1, p)
        y = group_divide(f, w, b, p)
        idx1 = reps.index(1)
        z = [int(mpmath.nint(v)) for v in y]
        z[idx1] = 0
        z[idx1] = -sum(z)
        exps = UnitExponents(f, ((1, tuple(z)),))
        zb = group_convolve(f, z, b, p)
        resid = max(abs(float(a - c)) for a, c in zip(w, zb))
        if resid > residual_bound * math.log(2) * max(1.0, math.log2(f)):
            raise DecodeFailed(f"residual {resid:.3g} outside decoding region")
        return exps


def encode_unit_perturbed(f, z, noise, p=96):
    """Test helper: embeddings of (unit with exponents z) * exp(noise)."""
    reps = embedding_indices(f)
    exps = UnitExponents(f, ((1, tuple(z)),))
    with workprec(p + LOG_GUARD):
        lu = unit_log_vector(exps, f, p)
        vals = tuple(mpmath.exp(a + mpf(e)) for a, e in zip(lu.entries, noise))
        return EmbeddedVector(f, tuple(mpc(v) for v in vals), p), exps
