"""Small exact linear algebra helpers over Python ints and Fractions.

Everything here is dense and meant for matrices of modest size; arbitrary
precision is the point, asymptotics are not.
"""

from fractions import Fraction

from .errors import InvalidInputError


def int_det(rows):
    """Exact determinant of a square integer matrix (fraction-free Bareiss)."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidInputError("matrix is not square")
    if n == 0:
        return 1
    a = [list(map(int, r)) for r in rows]
    sign = 1
    prev = 1
    for t in range(n - 1):
        if a[t][t] == 0:
            for i in range(t + 1, n):
                if a[i][t] != 0:
                    a[t], a[i] = a[i], a[t]
                    sign = -sign
                    break
            else:
                return 0
        piv = a[t][t]
        for i in range(t + 1, n):
            row_i = a[i]
            row_t = a[t]
            f = row_i[t]
            for j in range(t + 1, n):
                row_i[j] = (piv * row_i[j] - f * row_t[j]) // prev
            row_i[t] = 0
        prev = piv
    return sign * a[n - 1][n - 1]


def frac_det(rows):
    """Exact determinant of a square matrix of Fractions (or ints)."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidInputError("matrix is not square")
    a = [[Fraction(x) for x in r] for r in rows]
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        inv = Fraction(1) / a[c][c]
        for r in range(c + 1, n):
            if a[r][c]:
                f = a[r][c] * inv
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def frac_inverse(rows):
    """Exact inverse of a square matrix as Fractions; raises on singular input."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidInputError("matrix is not square")
    a = [[Fraction(x) for x in r] for r in rows]
    inv = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            raise InvalidInputError("matrix is singular")
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            inv[c], inv[piv] = inv[piv], inv[c]
        f = Fraction(1) / a[c][c]
        a[c] = [x * f for x in a[c]]
        inv[c] = [x * f for x in inv[c]]
        for r in range(n):
            if r != c and a[r][c]:
                g = a[r][c]
                a[r] = [x - g * y for x, y in zip(a[r], a[c])]
                inv[r] = [x - g * y for x, y in zip(inv[r], inv[c])]
    return inv


def gram_matrix(rows):
    """Column Gram matrix A^T A of a stack of integer rows."""
    if not rows:
        return []
    m = len(rows[0])
    g = [[0] * m for _ in range(m)]
    for row in rows:
        nz = [(j, v) for j, v in enumerate(row) if v]
        for j, vj in nz:
            gj = g[j]
            for l, vl in nz:
                gj[l] += vj * vl
    return g


def mat_vec(rows, vec):
    return [sum(a * x for a, x in zip(r, vec)) for r in rows]
