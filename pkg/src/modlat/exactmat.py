"""Exact matrices over O_K (rows of FieldElements): the unimodular
bookkeeping side of every reduction."""

from .tower import FieldElement, fe_one, fe_zero, ring_mul, absolute_norm


def mat_identity(d, f):
    return [[fe_one(f) if i == j else fe_zero(f) for j in range(d)] for i in range(d)]


def mat_copy(M):
    return [row[:] for row in M]


def mat_mul(A, B):
    m, k, d = len(A), len(B), len(B[0])
    f = A[0][0].f
    out = [[fe_zero(f) for _ in range(d)] for _ in range(m)]
    for i in range(m):
        for t in range(k):
            a = A[i][t]
            if a.is_zero():
                continue
            for j in range(d):
                b = B[t][j]
                if not b.is_zero():
                    out[i][j] = out[i][j] + ring_mul(a, b)
    return out


def mat_vec(A, v):
    f = A[0][0].f
    out = [fe_zero(f) for _ in range(len(A))]
    for i in range(len(A)):
        for t in range(len(v)):
            if not A[i][t].is_zero() and not v[t].is_zero():
                out[i] = out[i] + ring_mul(A[i][t], v[t])
    return out


def col_sub(M, i, j, mu):
    """Column op: col_i -= mu * col_j."""
    for r in range(len(M)):
        if not M[r][j].is_zero():
            M[r][i] = M[r][i] - ring_mul(mu, M[r][j])


def col_scale(M, i, u):
    for r in range(len(M)):
        if not M[r][i].is_zero():
            M[r][i] = ring_mul(M[r][i], u)


def col_swap(M, i, j):
    for r in range(len(M)):
        M[r][i], M[r][j] = M[r][j], M[r][i]


def det_exact(M):
    """Determinant by cofactor expansion; intended for small d."""
    d = len(M)
    f = M[0][0].f
    if d == 1:
        return M[0][0]
    if d == 2:
        return ring_mul(M[0][0], M[1][1]) - ring_mul(M[0][1], M[1][0])
    acc = fe_zero(f)
    for j in range(d):
        if M[0][j].is_zero():
            continue
        minor = [[M[r][c] for c in range(d) if c != j] for r in range(1, d)]
        term = ring_mul(M[0][j], det_exact(minor))
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def det_norm_is_unit(M):
    return abs(absolute_norm(det_exact(M))) == 1


def embed_block(U, d, j, f):
    """Place the square block U at offset j on the diagonal of Id_d."""
    out = mat_identity(d, f)
    k = len(U)
    for r in range(k):
        for c in range(k):
            out[j + r][j + c] = U[r][c]
    return out


def invert_unitriangular_exact(U):
    """Exact inverse of an upper-triangular matrix whose diagonal entries
    are units (inverted via exponent negation is not available here, so the
    diagonal must be +-1 times a root of unity with known exact inverse);
    used for transforms built from shears, where the diagonal is 1."""
    d = len(U)
    f = U[0][0].f
    for i in range(d):
        if U[i][i].coeffs != fe_one(f).coeffs:
            raise ValueError("exact inverse implemented for unit diagonal = 1")
    inv = mat_identity(d, f)
    # back substitution: inv = U^-1, column by column
    for j in range(d):
        for i in range(j - 1, -1, -1):
            acc = fe_zero(f)
            for t in range(i + 1, j + 1):
                if not U[i][t].is_zero() and not inv[t][j].is_zero():
                    acc = acc + ring_mul(U[i][t], inv[t][j])
            inv[i][j] = fe_zero(f) - acc
    return inv
