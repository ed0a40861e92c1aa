"""Cubical relative homology over a prime field and induced maps.

Cells of the grid's cubical complex are keyed by (anchor, mask): the
anchor is a vertex-lattice multi-index and the mask a bitset of the axes
along which the cell extends.  The relative complex of a pair of box
sets (P1, P0) is realized as the quotient: a cell survives iff it has at
least one coface box in P1 \\ P0 and none in P0.

The index map on homology is built as an acyclic-carrier chain map.
The carrier used for construction assigns to each cell the intersection
of the targets of its cofaces in P1; this is contained in the union
carrier, shrinks as cells grow (so faces have larger carriers), and for
rectangle-form box maps is itself a box rectangle, where the equation
del(c) = phi(del(sigma)) is solved in closed form by a chain
contraction instead of linear algebra.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import BoxdynError, CarrierNotAcyclic
from .grid import CubicalGrid
from .outer_approx import BoxMap

# a cell is (anchor, mask); anchor a tuple over the vertex lattice,
# mask a bitset of extended axes.  chains are dicts cell -> coeff in F_p.


def cell_dim(cell) -> int:
    return bin(cell[1]).count("1")


def cell_faces(cell):
    """Boundary faces with signs: del(sigma) = sum sign * face."""
    anchor, mask = cell
    out = []
    below = 0
    for i in range(len(anchor)):
        bit = 1 << i
        if mask & bit:
            sign = 1 if below % 2 == 0 else -1
            upper = tuple(a + 1 if j == i else a for j, a in enumerate(anchor))
            out.append(((upper, mask & ~bit), sign))
            out.append(((anchor, mask & ~bit), -sign))
            below += 1
    return out


def cell_coface_boxes(cell, shape):
    """Top-dimensional boxes having the cell as a face, as multi-indices."""
    anchor, mask = cell
    d = len(anchor)
    free = [i for i in range(d) if not (mask >> i) & 1]
    out = []
    for choice in itertools.product((0, 1), repeat=len(free)):
        j = list(anchor)
        ok = True
        for i, c in zip(free, choice):
            j[i] = anchor[i] - c
            if not (0 <= j[i] < shape[i]):
                ok = False
                break
        for i in range(d):
            if (mask >> i) & 1 and not (0 <= j[i] < shape[i]):
                ok = False
        if ok:
            out.append(tuple(j))
    return out


def box_cells(j):
    """All 3^d faces (incl. the box itself) of the box at multi-index j."""
    d = len(j)
    out = []
    for mask in range(1 << d):
        free = [i for i in range(d) if not (mask >> i) & 1]
        for choice in itertools.product((0, 1), repeat=len(free)):
            anchor = list(j)
            for i, c in zip(free, choice):
                anchor[i] = j[i] + c
            out.append((tuple(anchor), mask))
    return out


# ---------------------------------------------------------------------------
# mod-p helpers (dense, for small local systems and test oracles)

def _inv_mod(a: int, p: int) -> int:
    return pow(int(a) % p, p - 2, p)


def rank_mod_p(mat: np.ndarray, p: int) -> int:
    """Rank of an integer matrix over F_p by Gaussian elimination."""
    a = np.array(mat, dtype=np.int64) % p
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.flatnonzero(a[r:, c])
        if piv.size == 0:
            continue
        pr = r + piv[0]
        a[[r, pr]] = a[[pr, r]]
        a[r] = (a[r] * _inv_mod(a[r, c], p)) % p
        nz = np.flatnonzero(a[:, c])
        nz = nz[nz != r]
        a[nz] = (a[nz] - np.outer(a[nz, c], a[r])) % p
        r += 1
    return r


def solve_mod_p(mat: np.ndarray, rhs: np.ndarray, p: int):
    """One solution of mat @ x = rhs over F_p, or None if inconsistent."""
    a = np.array(mat, dtype=np.int64) % p
    b = np.array(rhs, dtype=np.int64).reshape(-1) % p
    rows, cols = a.shape
    aug = np.concatenate([a, b[:, None]], axis=1)
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.flatnonzero(aug[r:, c])
        if piv.size == 0:
            continue
        pr = r + piv[0]
        aug[[r, pr]] = aug[[pr, r]]
        aug[r] = (aug[r] * _inv_mod(aug[r, c], p)) % p
        nz = np.flatnonzero(aug[:, c])
        nz = nz[nz != r]
        aug[nz] = (aug[nz] - np.outer(aug[nz, c], aug[r])) % p
        pivots.append(c)
        r += 1
    if np.any(aug[r:, cols]):
        return None
    x = np.zeros(cols, dtype=np.int64)
    for k, c in enumerate(pivots):
        x[c] = aug[k, cols]
    return x


# ---------------------------------------------------------------------------


class PairComplex:
    """Relative (quotient) cubical complex of a box-set pair on a grid.

    Only cells carrying relative chains are stored: those with a coface
    box in region = P1 \\ P0 and no coface box in P0.  Every coface in P1
    of such a cell is a region box, so the complex is small whenever the
    region is, regardless of how large P1 is.
    """

    def __init__(self, grid: CubicalGrid, p1, p0, prime: int = 5):
        if prime < 2 or any(prime % k == 0 for k in range(2, int(prime**0.5) + 1)):
            raise BoxdynError(f"field order must be prime, got {prime}")
        self.grid = grid
        self.prime = int(prime)
        self.p1 = frozenset(int(b) for b in p1)
        self.p0 = frozenset(int(b) for b in p0)
        if not self.p0 <= self.p1:
            raise BoxdynError("P0 must be a subset of P1")
        self.region = self.p1 - self.p0
        shape = grid.shape

        candidates = set()
        for lin in sorted(self.region):
            j = grid.multi_index(lin)
            candidates.update(box_cells(j))
        cells = []
        for cell in candidates:
            cofaces = cell_coface_boxes(cell, shape)
            lins = [grid.linearize(c) for c in cofaces]
            if any(l in self.p0 for l in lins):
                continue
            if any(l in self.region for l in lins):
                cells.append(cell)
        # reduction order: dimension, then lexicographic
        cells.sort(key=lambda c: (cell_dim(c), c[0], c[1]))
        self.cells = cells
        self.cell_index = {c: i for i, c in enumerate(cells)}
        self.dims = np.array([cell_dim(c) for c in cells], dtype=np.int64)

    def __len__(self):
        return len(self.cells)

    def n_cells(self, dim: int) -> int:
        return int(np.count_nonzero(self.dims == dim))

    def contains(self, cell) -> bool:
        return cell in self.cell_index

    def boundary_chain(self, cell) -> dict:
        """Boundary within the quotient: faces outside the complex vanish."""
        p = self.prime
        out = {}
        for face, sign in cell_faces(cell):
            if face in self.cell_index:
                out[face] = (out.get(face, 0) + sign) % p
        return {c: v for c, v in out.items() if v}

    def boundary_matrix(self, dim: int) -> np.ndarray:
        """Dense boundary matrix C_dim -> C_{dim-1}; rows/cols in cell order."""
        rows = [c for c in self.cells if cell_dim(c) == dim - 1]
        cols = [c for c in self.cells if cell_dim(c) == dim]
        ridx = {c: i for i, c in enumerate(rows)}
        mat = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for jc, cell in enumerate(cols):
            for face, v in self.boundary_chain(cell).items():
                mat[ridx[face], jc] = v
        return mat

    def dump_boundary_triplets(self) -> str:
        """Sparse triplet text dump of all boundary entries (debugging)."""
        lines = ["# row_cell_index col_cell_index value"]
        for j, cell in enumerate(self.cells):
            for face, v in self.boundary_chain(cell).items():
                lines.append(f"{self.cell_index[face]} {j} {v}")
        return "\n".join(lines) + "\n"


def build_pair_complex(grid: CubicalGrid, p1, p0, prime: int = 5) -> PairComplex:
    return PairComplex(grid, p1, p0, prime)


class HomologyBasis:
    """Homology of a PairComplex via sparse column reduction over F_p.

    The boundary matrix, columns ordered by dimension then lex, is
    reduced left to right (persistence-style, R = D V).  Columns with
    zero reduced boundary whose own index is never a pivot are the
    essential cells; their V columns are representative cycles.  project
    expresses any relative cycle in those representatives by repeated
    pivot elimination.
    """

    def __init__(self, complex: PairComplex):
        self.complex = complex
        p = complex.prime
        n = len(complex.cells)
        idx = complex.cell_index

        R = []  # reduced boundary columns, dict row -> coeff
        V = []  # change-of-basis columns, dict row -> coeff
        pivot_of = {}  # low row -> column index with that pivot
        for j, cell in enumerate(complex.cells):
            rj = {idx[f]: v for f, v in complex.boundary_chain(cell).items()}
            vj = {j: 1}
            while rj:
                low = max(rj)
                k = pivot_of.get(low)
                if k is None:
                    break
                coef = (rj[low] * _inv_mod(R[k][low], p)) % p
                for r, v in R[k].items():
                    nv = (rj.get(r, 0) - coef * v) % p
                    if nv:
                        rj[r] = nv
                    else:
                        rj.pop(r, None)
                for r, v in V[k].items():
                    nv = (vj.get(r, 0) - coef * v) % p
                    if nv:
                        vj[r] = nv
                    else:
                        vj.pop(r, None)
            R.append(rj)
            V.append(vj)
            if rj:
                pivot_of[max(rj)] = j

        self._R = R
        self._V = V
        self._pivot_of = pivot_of
        essential = [j for j in range(n) if not R[j] and j not in pivot_of]
        self._essential = essential
        self._essential_pos = {j: i for i, j in enumerate(essential)}
        self._by_dim = {}
        for j in essential:
            self._by_dim.setdefault(int(complex.dims[j]), []).append(j)

    def rank(self, dim: int) -> int:
        return len(self._by_dim.get(dim, []))

    def representatives(self, dim: int):
        """Cycle chains (cell -> coeff dicts) generating H_dim."""
        cells = self.complex.cells
        out = []
        for j in self._by_dim.get(dim, []):
            out.append({cells[r]: v for r, v in self._V[j].items()})
        return out

    def project(self, chain: dict, dim: int) -> np.ndarray:
        """Coordinates of a relative cycle in the dim-homology basis."""
        p = self.complex.prime
        idx = self.complex.cell_index
        vec = {}
        for cell, v in chain.items():
            v %= p
            if v:
                vec[idx[cell]] = v
        coords = np.zeros(self.rank(dim), dtype=np.int64)
        order = self._by_dim.get(dim, [])
        pos = {j: i for i, j in enumerate(order)}
        while vec:
            low = max(vec)
            k = self._pivot_of.get(low)
            if k is not None:
                # subtract the boundary column R_k: changes nothing in homology
                coef = (vec[low] * _inv_mod(self._R[k][low], p)) % p
                src = self._R[k]
            elif low in pos:
                # essential representative V_low has unit pivot at its own index
                coef = vec[low] % p
                coords[pos[low]] = (coords[pos[low]] + coef) % p
                src = self._V[low]
            else:
                raise BoxdynError("chain is not a relative cycle")
            for r, v in src.items():
                nv = (vec.get(r, 0) - coef * v) % p
                if nv:
                    vec[r] = nv
                else:
                    vec.pop(r, None)
        return coords

    def betti_numbers(self, max_dim: int):
        return [self.rank(k) for k in range(max_dim + 1)]


def relative_homology(complex: PairComplex) -> HomologyBasis:
    return HomologyBasis(complex)


# ---------------------------------------------------------------------------
# carriers and the chain map


def carrier(boxmap: BoxMap, complex: PairComplex, cell) -> np.ndarray:
    """Declared carrier: union of targets over P1 cofaces, within P1."""
    grid = boxmap.grid
    out = set()
    for j in cell_coface_boxes(cell, grid.shape):
        lin = grid.linearize(j)
        if lin in complex.p1:
            out.update(int(t) for t in boxmap.targets(lin))
    return np.array(sorted(out & complex.p1), dtype=np.int64)


def _carrier_rect(boxmap: BoxMap, complex: PairComplex, cell):
    """Construction carrier as an index rectangle: intersection of the
    target ranges over the cell's P1 cofaces.  Returns (lo, hi) arrays or
    None when the intersection is empty."""
    grid = boxmap.grid
    lo = None
    for j in cell_coface_boxes(cell, grid.shape):
        lin = grid.linearize(j)
        if lin not in complex.p1:
            continue
        jmin, jmax = boxmap.target_ranges(lin)
        if lo is None:
            lo, hi = jmin.astype(np.int64).copy(), jmax.astype(np.int64).copy()
        else:
            lo = np.maximum(lo, jmin)
            hi = np.minimum(hi, jmax)
    if lo is None or np.any(lo > hi):
        return None
    return lo, hi


def _carrier_boxes(boxmap: BoxMap, complex: PairComplex, cell):
    """Construction carrier for explicit maps: intersection of target sets."""
    grid = boxmap.grid
    acc = None
    for j in cell_coface_boxes(cell, grid.shape):
        lin = grid.linearize(j)
        if lin not in complex.p1:
            continue
        t = set(int(x) for x in boxmap.targets(lin))
        acc = t if acc is None else (acc & t)
    return set() if acc is None else acc


def _contract(chain: dict, lo: np.ndarray, p: int) -> dict:
    """Chain contraction of the full rectangle complex with base vertex lo.

    Solves del(c) = z for any cycle z (dim >= 1) or augmentation-zero
    0-chain z supported in the closed rectangle anchored at lo.  Tensor
    contraction: each axis collapses to its left endpoint in turn.
    """
    out = {}
    for (anchor, mask), coef in chain.items():
        coef %= p
        if not coef:
            continue
        d = len(anchor)
        for i in range(d):
            if (mask >> i) & 1:
                break  # h of an edge factor is zero; later axes blocked too
            lo_i = int(lo[i])
            base = tuple(int(lo[k]) if k < i else anchor[k] for k in range(d))
            for j in range(lo_i, anchor[i]):
                a = tuple(j if k == i else base[k] for k in range(d))
                key = (a, mask | (1 << i))
                nv = (out.get(key, 0) + coef) % p
                if nv:
                    out[key] = nv
                else:
                    out.pop(key, None)
    return out


class ChainMapData:
    """phi per cell plus the carrier assignment used to build it."""

    def __init__(self, complex: PairComplex, phi: dict, carriers: dict):
        self.complex = complex
        self.phi = phi  # cell -> chain over complex cells (quotient)
        self.carriers = carriers  # cell -> sorted linear box array

    def apply(self, chain: dict) -> dict:
        p = self.complex.prime
        out = {}
        for cell, coef in chain.items():
            for c2, v in self.phi[cell].items():
                nv = (out.get(c2, 0) + coef * v) % p
                if nv:
                    out[c2] = nv
                else:
                    out.pop(c2, None)
        return out

    def dump_triplets(self) -> str:
        idx = self.complex.cell_index
        lines = ["# domain_cell_index image_cell_index value"]
        for cell in self.complex.cells:
            for c2, v in self.phi[cell].items():
                lines.append(f"{idx[cell]} {idx[c2]} {v}")
        return "\n".join(lines) + "\n"


def _check_acyclic_carrier(grid, boxes, prime, cell):
    """Reduced homology of the closed realization of a box set must vanish."""
    sub = PairComplex(grid, boxes, set(), prime)
    basis = HomologyBasis(sub)
    ok = basis.rank(0) == 1 and all(
        basis.rank(k) == 0 for k in range(1, grid.dimension + 1)
    )
    if not ok:
        raise CarrierNotAcyclic(cell, "carrier has nonvanishing reduced homology")


def chain_map(boxmap: BoxMap, complex: PairComplex,
              vertex_rule: str = "smallest") -> ChainMapData:
    """Endomorphism of the relative chain complex carried by the box map.

    Built in the full cubical complex dimension by dimension and then
    projected to the quotient; cells outside the complex are dropped.
    For rectangle carriers the boundary equation is solved by the chain
    contraction; non-rectangular carriers (explicit maps) are checked
    for acyclicity and solved by Gaussian elimination over F_p.
    vertex_rule "largest" picks the opposite corner in dim 0 (used to
    confirm choice-independence of the induced homology map).
    """
    grid = boxmap.grid
    p = complex.prime

    # guard: a region box adjacent to an exterior box would let chains
    # escape the quotient through the shared face; refuse loudly.
    for cell in complex.cells:
        for j in cell_coface_boxes(cell, grid.shape):
            lin = grid.linearize(j)
            if lin not in complex.p1 and boxmap.exterior[lin]:
                raise BoxdynError(
                    "index pair touches exterior boxes; enlarge the domain "
                    "or refine the grid"
                )

    # full-complex construction domain: closure of the region boxes
    domain = set()
    for lin in complex.region:
        domain.update(box_cells(grid.multi_index(lin)))
    cells = sorted(domain, key=lambda c: (cell_dim(c), c[0], c[1]))

    phi_full = {}
    carriers = {}
    for cell in cells:
        if boxmap.is_rect_form:
            rect = _carrier_rect(boxmap, complex, cell)
            if rect is None:
                raise CarrierNotAcyclic(cell, "carrier is empty")
            lo, hi = rect
        else:
            cboxes = _carrier_boxes(boxmap, complex, cell)
            if not cboxes:
                raise CarrierNotAcyclic(cell, "carrier is empty")
        dim = cell_dim(cell)
        if dim == 0:
            if boxmap.is_rect_form:
                corner = lo if vertex_rule == "smallest" else hi + 1
                phi_full[cell] = {(tuple(int(v) for v in corner), 0): 1}
            else:
                mis = sorted(grid.multi_index(b) for b in cboxes)
                j = mis[0] if vertex_rule == "smallest" else mis[-1]
                off = 0 if vertex_rule == "smallest" else 1
                phi_full[cell] = {(tuple(v + off for v in j), 0): 1}
        else:
            rhs = {}
            for face, sign in cell_faces(cell):
                for c2, v in phi_full[face].items():
                    nv = (rhs.get(c2, 0) + sign * v) % p
                    if nv:
                        rhs[c2] = nv
                    else:
                        rhs.pop(c2, None)
            if boxmap.is_rect_form:
                phi_full[cell] = _contract(rhs, lo, p)
            else:
                _check_acyclic_carrier(grid, cboxes, p, cell)
                sub = PairComplex(grid, cboxes, set(), p)
                mat = sub.boundary_matrix(dim)
                cols = [c for c in sub.cells if cell_dim(c) == dim]
                rows = [c for c in sub.cells if cell_dim(c) == dim - 1]
                ridx = {c: i for i, c in enumerate(rows)}
                b = np.zeros(len(rows), dtype=np.int64)
                for c2, v in rhs.items():
                    b[ridx[c2]] = v
                x = solve_mod_p(mat, b, p)
                if x is None:
                    raise CarrierNotAcyclic(cell, "boundary equation unsolvable")
                phi_full[cell] = {cols[i]: int(x[i]) % p
                                  for i in np.flatnonzero(x % p)}
        if boxmap.is_rect_form:
            carriers[cell] = (lo, hi)

    # project to the quotient
    phi = {}
    carrier_sets = {}
    for cell in complex.cells:
        phi[cell] = {c2: v for c2, v in phi_full[cell].items()
                     if c2 in complex.cell_index}
        carrier_sets[cell] = carrier(boxmap, complex, cell)

    cm = ChainMapData(complex, phi, carrier_sets)
    _assert_chain_map(cm)
    return cm


def _assert_chain_map(cm: ChainMapData):
    """del(phi) = phi(del) must hold exactly; violations are bugs."""
    complex = cm.complex
    p = complex.prime
    for cell in complex.cells:
        if cell_dim(cell) == 0:
            continue
        lhs = {}
        for c2, v in cm.phi[cell].items():
            for face, fv in complex.boundary_chain(c2).items():
                nv = (lhs.get(face, 0) + v * fv) % p
                if nv:
                    lhs[face] = nv
                else:
                    lhs.pop(face, None)
        rhs = {}
        for face, sign in cell_faces(cell):
            if face not in complex.cell_index:
                continue
            for c2, v in cm.phi[face].items():
                nv = (rhs.get(c2, 0) + sign * v) % p
                if nv:
                    rhs[c2] = nv
                else:
                    rhs.pop(c2, None)
        if lhs != rhs:
            raise BoxdynError(f"chain map does not commute with boundary at {cell}")


def induced_homology_map(cm: ChainMapData, basis: HomologyBasis) -> dict:
    """Matrix of the chain map on H_k for each dimension, over F_p."""
    complex = cm.complex
    out = {}
    for dim in range(complex.grid.dimension + 1):
        r = basis.rank(dim)
        mat = np.zeros((r, r), dtype=np.int64)
        for j, rep in enumerate(basis.representatives(dim)):
            mat[:, j] = basis.project(cm.apply(rep), dim)
        out[dim] = mat
    return out
