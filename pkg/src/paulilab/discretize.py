"""Finite-difference assembly of magnetic Schrodinger operators on a box.

The grid covers [-L, L]^{2n} with an odd number of nodes per axis so the
origin is a node.  All nodes are unknowns; stencil taps that would leave the
box are dropped, which realizes a homogeneous Dirichlet wall one spacing
outside the stored nodes.  First-order (covariant) terms use centered
differences, pure second derivatives use the 3-point stencil per axis, and
every assembled operator is Hermitian entry for entry, exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "Grid",
    "GridSizeError",
    "ScalingOverflowError",
    "SparseHermitianOperator",
    "DiagonalScaling",
    "IdentityResidualReport",
    "build_grid",
    "covariant_pair",
    "pauli",
    "dirac",
    "dirac_square_blocks",
    "box00",
    "box00_direct",
    "box0n",
    "box0n_direct",
    "conjugation_scaling",
    "identity_residual",
    "gaussian_test_family",
]

DEFAULT_SIZE_CAP = 200_000
IDENTITY_KINDS = ("2.2", "2.3", "dirac-square")


class GridSizeError(ValueError):
    """Requested grid exceeds the configured unknown cap."""


class ScalingOverflowError(FloatingPointError):
    """Diagonal conjugation would overflow double precision."""


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-L, L]^{2n}; axis order (x1, y1, ..., xn, yn).

    Node indices are raveled in C order over that axis order, so the last
    axis varies fastest.
    """

    n: int
    L: float
    h: float
    points_per_axis: int

    @property
    def num_points(self):
        return self.points_per_axis ** (2 * self.n)

    @cached_property
    def axis(self):
        return np.linspace(-self.L, self.L, self.points_per_axis)

    @cached_property
    def points(self):
        """All nodes as an (num_points, 2n) array in ravel order."""
        grids = np.meshgrid(*([self.axis] * (2 * self.n)), indexing="ij")
        return np.column_stack([g.ravel() for g in grids])

    def interior_mask(self, layers=2):
        """Nodes at least ``layers`` rings away from the outermost ring."""
        axis_ok = np.zeros(self.points_per_axis, dtype=bool)
        axis_ok[layers:self.points_per_axis - layers] = True
        mask = np.ones(self.num_points, dtype=bool)
        shape = (self.points_per_axis,) * (2 * self.n)
        for ax in range(2 * self.n):
            view = np.ones(shape, dtype=bool)
            idx = [slice(None)] * (2 * self.n)
            idx[ax] = ~axis_ok
            view[tuple(idx)] = False
            mask &= view.ravel()
        return mask

    def boundary_mask(self, layers=2):
        return ~self.interior_mask(layers)


def build_grid(n, L, h, cap=DEFAULT_SIZE_CAP):
    """Create a grid; refuses n > 2 and, for n=2, more than ``cap`` unknowns."""
    if n not in (1, 2):
        raise GridSizeError(f"only n in {{1, 2}} is supported, got n={n}")
    if L <= 0:
        raise ValueError(f"box half-width must be positive, got {L}")
    if not 0 < h <= L:
        raise ValueError(f"spacing must satisfy 0 < h <= L, got h={h}")
    N = 2 * round(L / h) + 1
    stored_h = 2.0 * L / (N - 1)
    if n == 2 and N ** 4 > cap:
        raise GridSizeError(
            f"grid would have {N ** 4} unknowns, above the cap of {cap}; "
            "increase h or lower L"
        )
    return Grid(n=n, L=float(L), h=stored_h, points_per_axis=N)


# ---------------------------------------------------------------------------
# sparse Hermitian wrapper
# ---------------------------------------------------------------------------

class SparseHermitianOperator:
    """CSR complex matrix certified to equal its own adjoint entrywise."""

    def __init__(self, matrix, certify=True):
        matrix = matrix.tocsr().astype(complex)
        matrix.eliminate_zeros()
        matrix.sort_indices()
        self.matrix = matrix
        self.hermitian_certified = False
        if certify:
            diff = (matrix - matrix.getH()).tocsr()
            diff.eliminate_zeros()
            if diff.nnz:
                raise ValueError(
                    f"operator is not exactly Hermitian; {diff.nnz} mismatched entries, "
                    f"max |difference| {np.max(np.abs(diff.data)):.3e}"
                )
            self.hermitian_certified = True

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    @cached_property
    def norm1(self):
        return float(np.max(np.abs(self.matrix).sum(axis=1)))

    def apply(self, vec):
        return self.matrix @ vec

    def __matmul__(self, vec):
        return self.matrix @ vec

    def scaled(self, factor):
        if np.iscomplexobj(factor) and np.imag(factor) != 0:
            raise ValueError("only real scaling preserves Hermiticity")
        return SparseHermitianOperator(self.matrix * float(factor))

    def toarray(self):
        return self.matrix.toarray()

    def export_matrix_market(self, path):
        """Write coordinate Matrix Market, complex hermitian, 1-based indices."""
        scipy.io.mmwrite(path, self.matrix, field="complex", symmetry="hermitian")


@dataclass(frozen=True)
class DiagonalScaling:
    """Diagonal operator diag(exp(s * phi(node))); exact inverse under s -> -s."""

    diagonal: np.ndarray
    exponent: float

    def apply(self, vec):
        return self.diagonal * vec

    @property
    def matrix(self):
        return sp.diags(self.diagonal).tocsr()

    def as_operator(self):
        return SparseHermitianOperator(sp.diags(self.diagonal.astype(complex)))


# ---------------------------------------------------------------------------
# stencil factory
# ---------------------------------------------------------------------------

def _axis_matrices(grid):
    """Per-axis second difference K and centered first difference Dc on the
    full index space (Kronecker lifted)."""
    N = grid.points_per_axis
    e = np.ones(N)
    K1 = sp.diags([-e[:-1], 2.0 * e, -e[:-1]], [-1, 0, 1], format="csr") / grid.h**2
    D1 = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="csr") / (2.0 * grid.h)
    eye = sp.identity(N, format="csr")
    naxes = 2 * grid.n
    Ks, Ds = [], []
    for ax in range(naxes):
        mats = [eye] * naxes
        mats[ax] = K1
        acc = mats[0]
        for m in mats[1:]:
            acc = sp.kron(acc, m, format="csr")
        Ks.append(acc)
        mats[ax] = D1
        acc = mats[0]
        for m in mats[1:]:
            acc = sp.kron(acc, m, format="csr")
        Ds.append(acc)
    return Ks, Ds


def _check_weight_grid(w, grid):
    if w.n != grid.n:
        raise ValueError(f"weight has n={w.n} but grid has n={grid.n}")


def _certify_on_grid(w, grid):
    w.certify_plurisubharmonic(grid.points)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def covariant_pair(w, grid, j):
    """Hermitian covariant derivative pair for complex coordinate j (0-based):
    (-i d/dx_j - A_{2j}, -i d/dy_j - A_{2j+1})."""
    _check_weight_grid(w, grid)
    if not 0 <= j < grid.n:
        raise ValueError(f"coordinate index {j} out of range for n={grid.n}")
    _, Ds = _axis_matrices(grid)
    A = w.magnetic_potential_many(grid.points)
    ops = []
    for axis in (2 * j, 2 * j + 1):
        mat = (-1j) * Ds[axis] - sp.diags(A[:, axis]).astype(complex)
        ops.append(SparseHermitianOperator(mat.tocsr()))
    return tuple(ops)


def _pauli_matrix(w, grid, sign):
    Ks, Ds = _axis_matrices(grid)
    pts = grid.points
    A = w.magnetic_potential_many(pts)
    V = w.electric_potential_many(pts)
    mat = sum(Ks[1:], Ks[0]).astype(complex)
    for axis in range(2 * grid.n):
        dA = sp.diags(A[:, axis]).tocsr()
        mat = mat + 1j * (dA @ Ds[axis] + Ds[axis] @ dA)
    diag = np.einsum("ij,ij->i", A, A) + sign * V
    return (mat + sp.diags(diag)).tocsr()


def pauli(w, grid, sign, certify_weight=True):
    """Magnetic Schrodinger operator  -Delta_A + sign * V  on the grid.

    ``sign`` is +1 or -1.  The squared covariant derivatives are assembled
    with the pure second-derivative part replaced by the narrow 3-point
    stencil per axis, keeping the matrix Hermitian and second order.
    """
    _check_weight_grid(w, grid)
    if sign not in (1, -1, +1.0, -1.0):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if certify_weight:
        _certify_on_grid(w, grid)
    return SparseHermitianOperator(_pauli_matrix(w, grid, int(sign)))


def dirac(w, grid, certify_weight=True):
    """Block Dirac operator [[0, C], [C*, 0]] with C built from the covariant
    pair of the single complex coordinate; n must be 1."""
    _check_weight_grid(w, grid)
    if grid.n != 1:
        raise ValueError("the block Dirac operator is only assembled for n=1")
    if certify_weight:
        _certify_on_grid(w, grid)
    ax, ay = covariant_pair(w, grid, 0)
    C = (ax.matrix - 1j * ay.matrix).tocsr()
    D = sp.bmat([[None, C], [C.getH(), None]], format="csr")
    return SparseHermitianOperator(D)


def dirac_square_blocks(w, grid, certify_weight=True):
    """Diagonal blocks of the squared Dirac operator: (C C*, C* C).

    The off-diagonal blocks of the square vanish structurally; the function
    returns them as well so callers can assert exact zero.
    """
    d = dirac(w, grid, certify_weight=certify_weight)
    sq = (d.matrix @ d.matrix).tocsr()
    sq.eliminate_zeros()
    half = d.dim // 2
    blk00 = sq[:half, :half].tocsr()
    blk11 = sq[half:, half:].tocsr()
    off01 = sq[:half, half:].tocsr()
    off10 = sq[half:, :half].tocsr()
    return blk00, blk11, off01, off10


def _wirtinger_first_order(w, grid):
    """sum_j diag(dphi/dz_j) Dzbar_j with centered Wirtinger stencils."""
    _, Ds = _axis_matrices(grid)
    pts = grid.points
    acc = None
    for j in range(grid.n):
        # phi_z = (phi_x - i phi_y)/2
        phz = 0.5 * (w.gradient_axis_many(pts, 2 * j) - 1j * w.gradient_axis_many(pts, 2 * j + 1))
        Dzb = 0.5 * (Ds[2 * j] + 1j * Ds[2 * j + 1])
        term = sp.diags(phz).tocsr() @ Dzb
        acc = term if acc is None else acc + term
    return acc.tocsr()


def box00_direct(w, grid):
    """Direct Wirtinger-stencil form of the scalar weighted Laplacian,
    acting in the weighted space:  (1/4) sum K_axis + sum diag(phi_z_j) Dzbar_j.

    Not Hermitian in the plain inner product; used for cross-validation.
    """
    _check_weight_grid(w, grid)
    Ks, _ = _axis_matrices(grid)
    lap = sum(Ks[1:], Ks[0]).astype(complex)
    return (0.25 * lap + _wirtinger_first_order(w, grid)).tocsr()


def box0n_direct(w, grid):
    """Direct form of the top-degree weighted Laplacian coefficient operator:
    box00_direct plus the zero-order term diag(tr M_phi)."""
    _check_weight_grid(w, grid)
    tr = w.levi_trace_many(grid.points)
    return (box00_direct(w, grid) + sp.diags(tr)).tocsr()


def box00(w, grid, certify_weight=True):
    """Scalar weighted Laplacian conjugated to the unweighted space: (1/4) P-."""
    return pauli(w, grid, -1, certify_weight=certify_weight).scaled(0.25)


def box0n(w, grid, certify_weight=True):
    """Top-degree weighted Laplacian conjugated to the unweighted space: (1/4) P+."""
    return pauli(w, grid, +1, certify_weight=certify_weight).scaled(0.25)


def conjugation_scaling(w, grid, s):
    """Diagonal scaling diag(exp(s * phi(node))).

    Guards against overflow: |s * phi| must stay below 700 on the grid.
    """
    _check_weight_grid(w, grid)
    if not np.isfinite(s):
        raise ValueError("scaling exponent must be finite")
    phi = w.value_many(grid.points)
    worst = float(np.max(np.abs(s * phi))) if phi.size else 0.0
    if worst > 700.0:
        raise ScalingOverflowError(
            f"scaling overflow: max |s*phi| = {worst:.1f} > 700; reduce L or rescale phi"
        )
    return DiagonalScaling(diagonal=np.exp(s * phi), exponent=float(s))


# ---------------------------------------------------------------------------
# identity residuals
# ---------------------------------------------------------------------------

def gaussian_test_family(grid):
    """Six smooth, rapidly decaying test vectors: Gaussians times low-order
    polynomials, centered well inside the box (below rounding at the wall)."""
    pts = grid.points
    r2 = np.einsum("ij,ij->i", pts, pts)
    g = np.exp(-2.0 * r2)
    x1, y1 = pts[:, 0], pts[:, 1]
    shift = pts - np.resize([0.5, -0.3], pts.shape[1])
    g2 = np.exp(-2.0 * np.einsum("ij,ij->i", shift, shift))
    if grid.n == 1:
        polys = [np.ones_like(x1), x1, y1, x1 * y1, x1 * x1 - y1 * y1]
    else:
        x2, y2 = pts[:, 2], pts[:, 3]
        polys = [np.ones_like(x1), x1, y2, x1 * y2, x1 * x1 - x2 * x2]
    return [p * g for p in polys] + [g2]


@dataclass
class IdentityResidualReport:
    """Measured interior residuals of a discrete operator identity under
    grid refinement, with the observed convergence order."""

    which: str
    test_functions: int
    h_values: list
    max_errors: list
    observed_order: float
    offdiag_max: float = None

    @property
    def max_interior_error(self):
        return self.max_errors[-1]

    def to_dict(self):
        order = self.observed_order
        out = {
            "which": self.which,
            "test_functions": self.test_functions,
            "h_values": self.h_values,
            "max_errors": self.max_errors,
            "max_interior_error": self.max_interior_error,
            # an exactly satisfied identity has no measurable order
            "observed_order": order if np.isfinite(order) else None,
        }
        if self.offdiag_max is not None:
            out["offdiag_max"] = self.offdiag_max
        return out


def _residual_one_level(w, grid, which):
    mask = grid.interior_mask(layers=2)
    tests = gaussian_test_family(grid)
    emax = 0.0
    offmax = None
    if which in ("2.2", "2.3"):
        scale = conjugation_scaling(w, grid, 0.5)
        inv = conjugation_scaling(w, grid, -0.5)
        if which == "2.2":
            direct = box00_direct(w, grid)
            ref = pauli(w, grid, -1, certify_weight=False)
        else:
            direct = box0n_direct(w, grid)
            ref = pauli(w, grid, +1, certify_weight=False)
        for g in tests:
            lhs = inv.apply(direct @ scale.apply(g.astype(complex)))
            rhs = 0.25 * (ref @ g.astype(complex))
            emax = max(emax, float(np.max(np.abs((lhs - rhs)[mask]))))
    elif which == "dirac-square":
        blk00, blk11, off01, off10 = dirac_square_blocks(w, grid, certify_weight=False)
        offmax = 0.0
        for off in (off01, off10):
            if off.nnz:
                offmax = max(offmax, float(np.max(np.abs(off.data))))
        pm = pauli(w, grid, -1, certify_weight=False)
        pp = pauli(w, grid, +1, certify_weight=False)
        for g in tests:
            gv = g.astype(complex)
            emax = max(emax, float(np.max(np.abs((blk00 @ gv - pm @ gv))[mask])))
            emax = max(emax, float(np.max(np.abs((blk11 @ gv - pp @ gv))[mask])))
    else:
        raise ValueError(f"unknown identity {which!r}; expected one of {IDENTITY_KINDS}")
    return emax, offmax, len(tests)


def identity_residual(w, grid, which, refinement_levels=3):
    """Apply both sides of a discrete identity to smooth test vectors on the
    interior and measure the convergence order under h -> h/2 refinement.

    ``which`` selects the check: "2.2" compares the conjugated direct scalar
    weighted Laplacian against (1/4)(-Delta_A - V); "2.3" the top-degree
    variant against (1/4)(-Delta_A + V); "dirac-square" asserts exactly zero
    off-diagonal blocks of the squared Dirac operator and compares its
    diagonal blocks against the two Pauli assemblies.
    """
    if which not in IDENTITY_KINDS:
        raise ValueError(f"unknown identity {which!r}; expected one of {IDENTITY_KINDS}")
    if which == "dirac-square" and grid.n != 1:
        raise ValueError("the Dirac decomposition check requires n=1")
    if refinement_levels < 1:
        raise ValueError("need at least one refinement level")
    _certify_on_grid(w, grid)

    h_values, errors = [], []
    offdiag_max = None
    ntests = 0
    for level in range(refinement_levels):
        g = build_grid(grid.n, grid.L, grid.h / 2**level)
        emax, offmax, ntests = _residual_one_level(w, g, which)
        h_values.append(g.h)
        errors.append(emax)
        if offmax is not None:
            offdiag_max = offmax if offdiag_max is None else max(offdiag_max, offmax)

    if len(errors) >= 2 and all(e > 0 for e in errors):
        orders = [np.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
        observed = float(np.mean(orders))
    else:
        observed = float("nan") if any(e > 0 for e in errors) else float("inf")
    return IdentityResidualReport(
        which=which,
        test_functions=ntests,
        h_values=h_values,
        max_errors=errors,
        observed_order=observed,
        offdiag_max=offdiag_max,
    )
