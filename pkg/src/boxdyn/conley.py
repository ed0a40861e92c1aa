"""Shift-equivalence invariant of the induced homology map.

Over a field the shift class of a square matrix is the similarity class
of its restriction to the eventual image (the nilpotent part discarded).
The canonical label per dimension is the characteristic polynomial of
that restriction, computed division-free by the Berkowitz algorithm;
the full invariant-factor list is retained internally via Smith normal
form of xI - A over F_p[x].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoxdynError
from .graph_dynamics import Condensation, index_pair
from .homology import (HomologyBasis, PairComplex, _inv_mod, chain_map,
                       induced_homology_map, rank_mod_p, solve_mod_p)
from .outer_approx import BoxMap

# polynomials over F_p are tuples of coefficients, ascending powers,
# no trailing zeros; the zero shift class is represented by None.


def _poly_trim(c):
    c = [int(v) for v in c]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_mul(a, b, p):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = (out[i + j] + x * y) % p
    return _poly_trim(out)


def _poly_divmod(a, b, p):
    a = list(a)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv = _inv_mod(b[-1], p)
    q = [0] * max(len(a) - len(b) + 1, 0)
    for k in range(len(a) - len(b), -1, -1):
        coef = (a[k + len(b) - 1] * inv) % p
        q[k] = coef
        if coef:
            for i, bv in enumerate(b):
                a[k + i] = (a[k + i] - coef * bv) % p
    return _poly_trim(q), _poly_trim(a)


def _poly_monic(a, p):
    if not a:
        return ()
    inv = _inv_mod(a[-1], p)
    return _poly_trim([(v * inv) % p for v in a])


def format_poly(coeffs, p) -> str:
    """Monic, descending powers; coefficient p-1 printed as -1."""
    if coeffs is None:
        return "0"
    coeffs = _poly_trim(coeffs)
    if not coeffs:
        return "0"
    deg = len(coeffs) - 1
    parts = []
    for k in range(deg, -1, -1):
        c = coeffs[k] % p
        if c == 0:
            continue
        if k == deg:
            sign, mag = "", 1  # monic by construction
        elif c == p - 1:
            sign, mag = " - ", 1
        else:
            sign, mag = " + ", c
        if k == 0:
            term = str(mag)
        elif k == 1:
            term = "x" if mag == 1 else f"{mag}x"
        else:
            term = f"x^{k}" if mag == 1 else f"{mag}x^{k}"
        parts.append(sign + term)
    return "".join(parts) if parts else "0"


def charpoly_mod_p(m: np.ndarray, p: int):
    """Characteristic polynomial det(xI - m) over F_p, Berkowitz method.

    Division-free, so it works for any prime modulus regardless of the
    matrix size.  Returns ascending coefficients, monic.
    """
    a = np.array(m, dtype=np.int64) % p
    n = a.shape[0]
    if n == 0:
        return (1,)
    # vector of coefficients of the leading principal submatrix charpoly,
    # highest power first
    vec = np.array([1, (-a[0, 0]) % p], dtype=np.int64)
    for i in range(1, n):
        top = a[:i, :i]
        row = a[i, :i]
        col = a[:i, i]
        # first column of the Toeplitz factor
        first = [1, (-a[i, i]) % p]
        w = col % p
        for _ in range(i):
            first.append((-(row @ w)) % p)
            w = (top @ w) % p
        toep = np.zeros((i + 2, i + 1), dtype=np.int64)
        for r in range(i + 2):
            for c in range(i + 1):
                if 0 <= r - c < len(first):
                    toep[r, c] = first[r - c]
        vec = (toep @ vec) % p
    return _poly_trim(list(vec[::-1]))


def invariant_factors_mod_p(m: np.ndarray, p: int):
    """Nonconstant invariant factors of m: Smith normal form of xI - m
    over F_p[x].  Returned monic, each dividing the next."""
    a = np.array(m, dtype=np.int64) % p
    n = a.shape[0]
    mat = [[() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            base = [(-a[i, j]) % p]
            if i == j:
                base.append(1)
            mat[i][j] = _poly_trim(base)

    def deg(q):
        return len(q) - 1 if q else -1

    factors = []
    for t in range(n):
        while True:
            best = None
            for i in range(t, n):
                for j in range(t, n):
                    if mat[i][j] and (best is None or deg(mat[i][j]) < deg(mat[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                break
            bi, bj = best
            mat[t], mat[bi] = mat[bi], mat[t]
            for row in mat:
                row[t], row[bj] = row[bj], row[t]
            dirty = False
            for i in range(t + 1, n):
                if mat[i][t]:
                    q, r = _poly_divmod(mat[i][t], mat[t][t], p)
                    for j in range(t, n):
                        mat[i][j] = _poly_trim(
                            [(x - y) % p for x, y in
                             _zip_pad(mat[i][j], _poly_mul(q, mat[t][j], p))]
                        )
                    if mat[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if mat[t][j]:
                    q, r = _poly_divmod(mat[t][j], mat[t][t], p)
                    for i in range(t, n):
                        mat[i][j] = _poly_trim(
                            [(x - y) % p for x, y in
                             _zip_pad(mat[i][j], _poly_mul(q, mat[i][t], p))]
                        )
                    if mat[t][j]:
                        dirty = True
            if dirty:
                continue
            # pivot must divide every remaining entry
            fixed = False
            for i in range(t + 1, n):
                for j in range(t + 1, n):
                    if mat[i][j]:
                        _, r = _poly_divmod(mat[i][j], mat[t][t], p)
                        if r:
                            for jj in range(t, n):
                                mat[t][jj] = _poly_trim(
                                    [(x + y) % p for x, y in
                                     _zip_pad(mat[t][jj], mat[i][jj])]
                                )
                            fixed = True
                            break
                if fixed:
                    break
            if not fixed:
                break
        if mat[t][t]:
            piv = _poly_monic(mat[t][t], p)
            if deg(piv) >= 1:
                factors.append(piv)
    return factors


def _zip_pad(a, b):
    n = max(len(a), len(b))
    return zip(list(a) + [0] * (n - len(a)), list(b) + [0] * (n - len(b)))


def _column_space_basis(m: np.ndarray, p: int) -> np.ndarray:
    """Pivot columns of m as a basis matrix of its column space."""
    a = np.array(m, dtype=np.int64) % p
    rows, cols = a.shape
    work = a.copy()
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(work[r:, c])
        if nz.size == 0:
            continue
        pr = r + nz[0]
        work[[r, pr]] = work[[pr, r]]
        work[r] = (work[r] * _inv_mod(work[r, c], p)) % p
        other = np.flatnonzero(work[:, c])
        other = other[other != r]
        work[other] = (work[other] - np.outer(work[other, c], work[r])) % p
        pivots.append(c)
        r += 1
    return a[:, pivots]


def shift_class(m: np.ndarray, p: int):
    """Characteristic polynomial of m restricted to its eventual image.

    Finds the smallest k with rank(m^k) = rank(m^{k+1}); on the column
    space of m^k the map is invertible and its characteristic polynomial
    is the shift-class label.  Returns ascending coefficients, or None
    when the eventual image is trivial (nilpotent m).
    """
    a = np.array(m, dtype=np.int64) % p
    n = a.shape[0]
    if n == 0:
        return None
    power = np.eye(n, dtype=np.int64)
    prev_rank = n
    for _ in range(n + 1):
        nxt = (a @ power) % p
        rk = rank_mod_p(nxt, p)
        if rk == prev_rank:
            break
        power = nxt
        prev_rank = rk
    if prev_rank == 0:
        return None
    basis = _column_space_basis(power, p)
    small = _restrict(a, basis, p)
    return charpoly_mod_p(small, p)


def _restrict(a: np.ndarray, basis: np.ndarray, p: int) -> np.ndarray:
    """Matrix of a on the invariant subspace spanned by basis columns."""
    r = basis.shape[1]
    out = np.zeros((r, r), dtype=np.int64)
    img = (a @ basis) % p
    for j in range(r):
        x = solve_mod_p(basis, img[:, j], p)
        if x is None:
            raise BoxdynError("subspace is not invariant under the matrix")
        out[:, j] = x % p
    return out


def shift_invariant_factors(m: np.ndarray, p: int):
    """Invariant factors of the eventual-image restriction (internal
    exact representative of the shift class)."""
    a = np.array(m, dtype=np.int64) % p
    n = a.shape[0]
    if n == 0:
        return []
    power = np.eye(n, dtype=np.int64)
    prev_rank = n
    for _ in range(n + 1):
        nxt = (a @ power) % p
        rk = rank_mod_p(nxt, p)
        if rk == prev_rank:
            break
        power = nxt
        prev_rank = rk
    if prev_rank == 0:
        return []
    basis = _column_space_basis(power, p)
    return invariant_factors_mod_p(_restrict(a, basis, p), p)


@dataclass(frozen=True)
class ConleyIndex:
    """Per-dimension shift-class labels of an isolated invariant set."""

    prime: int
    polys: tuple  # per dim: ascending coeff tuple, or None for zero
    invariant_factors: tuple  # per dim: tuple of ascending coeff tuples

    def __str__(self):
        inner = ", ".join(format_poly(q, self.prime) for q in self.polys)
        return f"({inner})"

    def labels(self):
        return tuple(format_poly(q, self.prime) for q in self.polys)

    def is_trivial(self) -> bool:
        return all(q is None for q in self.polys)

    def to_jsonable(self) -> dict:
        return {
            "prime": self.prime,
            "polys": [None if q is None else list(q) for q in self.polys],
            "invariant_factors": [
                [list(f) for f in fs] for fs in self.invariant_factors
            ],
            "labels": list(self.labels()),
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "ConleyIndex":
        return cls(
            prime=int(doc["prime"]),
            polys=tuple(None if q is None else tuple(q) for q in doc["polys"]),
            invariant_factors=tuple(
                tuple(tuple(f) for f in fs) for fs in doc["invariant_factors"]
            ),
        )


def conley_index(boxmap: BoxMap, cond: Condensation, cid: int,
                 prime: int = 5) -> ConleyIndex:
    """Index pair -> relative complex -> chain map -> homology matrix ->
    shift class, per dimension."""
    pair = index_pair(boxmap, cond, cid)
    complex = PairComplex(boxmap.grid, pair.p1, pair.p0, prime)
    basis = HomologyBasis(complex)
    cm = chain_map(boxmap, complex)
    mats = induced_homology_map(cm, basis)
    polys = []
    factors = []
    for dim in range(boxmap.grid.dimension + 1):
        polys.append(shift_class(mats[dim], prime))
        factors.append(tuple(shift_invariant_factors(mats[dim], prime)))
    return ConleyIndex(prime=prime, polys=tuple(polys),
                       invariant_factors=tuple(factors))


def nontriviality(ci: ConleyIndex):
    """(flag, report).  A nonzero index certifies a nonempty isolated
    invariant set in the enclosed region; a zero index proves nothing."""
    flag = not ci.is_trivial()
    if flag:
        report = (
            f"Conley index {ci} is nonzero: the enclosing region contains a "
            "nonempty isolated invariant set of every map compatible with "
            "the outer approximation."
        )
    else:
        report = (
            "Conley index is zero in every dimension: no conclusion. A zero "
            "index does not imply the invariant set is empty."
        )
    return flag, report
