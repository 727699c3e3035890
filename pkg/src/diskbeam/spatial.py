"""Cubic Hermite discretisation of the clamped-free beam on [0, 1].

Each node carries a displacement and a slope. Node 0 is clamped, so its
two degrees of freedom are removed and free dof ``2*(i-1) + k`` belongs to
node ``i`` (k = 0 displacement, k = 1 slope). The free-end moment feedback
enters the weak form as the natural boundary term ``EI f(s) b`` where
``b`` extracts the tip slope.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import ConfigurationError, NumericalError
from .model import PhysicalParams, validate_params

HALF_BANDWIDTH = 3
DEFAULT_ELEMENTS = 64

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(6)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


@dataclass(frozen=True)
class Grid:
    n_elements: int = DEFAULT_ELEMENTS
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 4:
            raise ConfigurationError("n_elements must be an integer >= 4")
        object.__setattr__(self, "n_elements", int(self.n_elements))
        object.__setattr__(self, "nodes", np.linspace(0.0, 1.0, self.n_elements + 1))

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def ndof(self) -> int:
        return 2 * self.n_elements

    def dof_map(self):
        """List of (node, derivative order) for each free dof."""
        return [(i, k) for i in range(1, self.n_elements + 1) for k in (0, 1)]

    def element_dofs(self, e: int):
        """Free-dof indices of element e; -1 marks a clamped dof."""
        first = 2 * (e - 1)
        return np.array([first, first + 1, first + 2, first + 3])


def shape_functions(xi, h, derivative=0):
    """Hermite basis (and x-derivatives) at local coordinate xi in [0, 1]; shape (4, len(xi))."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if derivative == 0:
        return np.array([1 - 3 * xi**2 + 2 * xi**3,
                         h * (xi - 2 * xi**2 + xi**3),
                         3 * xi**2 - 2 * xi**3,
                         h * (-xi**2 + xi**3)])
    if derivative == 1:
        return np.array([-6 * xi + 6 * xi**2,
                         h * (1 - 4 * xi + 3 * xi**2),
                         6 * xi - 6 * xi**2,
                         h * (-2 * xi + 3 * xi**2)]) / h
    if derivative == 2:
        return np.array([-6 + 12 * xi,
                         h * (-4 + 6 * xi),
                         6 - 12 * xi,
                         h * (-2 + 6 * xi)]) / h**2
    if derivative == 3:
        one = np.ones_like(xi)
        return np.array([12 * one, 6 * h * one, -12 * one, 6 * h * one]) / h**3
    raise ValueError("derivative must be 0, 1, 2 or 3")


def element_mass(h):
    return h / 420.0 * np.array([
        [156, 22 * h, 54, -13 * h],
        [22 * h, 4 * h**2, 13 * h, -3 * h**2],
        [54, 13 * h, 156, -22 * h],
        [-13 * h, -3 * h**2, -22 * h, 4 * h**2]])


def element_stiffness(h):
    return 1.0 / h**3 * np.array([
        [12, 6 * h, -12, 6 * h],
        [6 * h, 4 * h**2, -6 * h, 2 * h**2],
        [-12, -6 * h, 12, -6 * h],
        [6 * h, 2 * h**2, -6 * h, 4 * h**2]])


def _element_weighted_mixed(h, x0):
    """G_e[i, j] = int x N_i N_j' dx over one element (Gauss, exact for degree <= 11)."""
    N = shape_functions(_GAUSS_X, h)
    dN = shape_functions(_GAUSS_X, h, 1)
    x = x0 + h * _GAUSS_X
    return h * (N * (x * _GAUSS_W)) @ dN.T


def _scatter(grid, local):
    """Assemble per-element 4x4 blocks into the free-dof matrix (clamped rows dropped)."""
    n = grid.ndof
    A = np.zeros((n + 2, n + 2))
    for e in range(grid.n_elements):
        idx = slice(2 * e, 2 * e + 4)
        A[idx, idx] += local(e)
    return A[2:, 2:]


@dataclass(frozen=True)
class Operators:
    """Assembled free-dof matrices. ``M = rho*M0``; ``Kb`` is the unweighted bending matrix."""

    grid: Grid
    params: PhysicalParams
    M: np.ndarray = field(repr=False)
    Kb: np.ndarray = field(repr=False)
    M0: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    tip_slope: np.ndarray = field(repr=False)
    tip_value: np.ndarray = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.grid.ndof

    def stiffness(self, omega=None):
        """EI Kb - rho omega^2 M0 (omega defaults to varpi)."""
        w = self.params.varpi if omega is None else omega
        return self.params.EI * self.Kb - self.params.rho * w * w * self.M0

    def Q(self, y, omega=None):
        """Potential part of the squared state norm: EI y'Kb y - rho w^2 y'M0 y."""
        return float(y @ self.stiffness(omega) @ y)

    def l2(self, u, w=None):
        """int u w dx for Hermite fields u, w."""
        return float(u @ self.M0 @ (u if w is None else w))


def assemble(params: PhysicalParams, grid: Grid | int = DEFAULT_ELEMENTS,
             check: bool = True) -> Operators:
    """Mass, bending and coupling matrices for the clamped-free beam."""
    if isinstance(grid, int):
        grid = Grid(grid)
    if check:
        report = validate_params(params)
        if not report.admissible:
            raise ConfigurationError("non-admissible parameters:\n" + str(report))
    h = grid.h
    me, ke = element_mass(h), element_stiffness(h)
    M0 = _scatter(grid, lambda e: me)
    Kb = _scatter(grid, lambda e: ke)
    G = _scatter(grid, lambda e: _element_weighted_mixed(h, e * h))
    b = np.zeros(grid.ndof)
    b[-1] = 1.0
    tv = np.zeros(grid.ndof)
    tv[-2] = 1.0
    for A in (M0, Kb):
        A[:] = 0.5 * (A + A.T)
    return Operators(grid, params, params.rho * M0, Kb, M0, G, b, tv)


def to_banded(A, u=HALF_BANDWIDTH):
    """Upper banded storage of a symmetric matrix for ``scipy.linalg.cholesky_banded``."""
    n = A.shape[0]
    ab = np.zeros((u + 1, n))
    for k in range(u + 1):
        ab[u - k, k:] = np.diagonal(A, k)
    return ab


def half_bandwidth(A, tol=0.0):
    rows, cols = np.nonzero(np.abs(A) > tol)
    return int(np.max(np.abs(rows - cols))) if rows.size else 0


class BandedSPD:
    """Cholesky factor of a symmetric positive-definite banded matrix."""

    def __init__(self, A, u=HALF_BANDWIDTH):
        try:
            self.cb = sla.cholesky_banded(to_banded(A, u))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("banded Cholesky failed (matrix not positive definite)",
                                 {"min_diag": float(np.min(np.diag(A)))}) from exc

    def solve(self, rhs):
        return sla.cho_solve_banded((self.cb, False), rhs)


# --------------------------------------------------------------------------
# interpolation and evaluation

def interpolate(grid: Grid, func, dfunc) -> np.ndarray:
    """Nodal Hermite interpolant: values func(x_i) and slopes dfunc(x_i) at nodes 1..N."""
    x = grid.nodes[1:]
    out = np.empty(grid.ndof)
    out[0::2] = np.broadcast_to(func(x), x.shape)
    out[1::2] = np.broadcast_to(dfunc(x), x.shape)
    return out


def full_dofs(grid: Grid, dofs) -> np.ndarray:
    """Prepend the clamped (zero) dofs of node 0."""
    return np.concatenate([[0.0, 0.0], np.asarray(dofs, dtype=float)])


def evaluate(grid: Grid, dofs, x, derivative=0):
    """Evaluate the Hermite field (or one of its first three derivatives) at points x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = full_dofs(grid, dofs)
    e = np.clip((x / grid.h).astype(int), 0, grid.n_elements - 1)
    xi = x / grid.h - e
    N = shape_functions(xi, grid.h, derivative)
    idx = 2 * e[None, :] + np.arange(4)[:, None]
    return np.sum(N * u[idx], axis=0)


def load_vector(grid: Grid, load) -> np.ndarray:
    """Consistent load vector int q phi_i dx for a constant or callable q(x)."""
    q = load if callable(load) else (lambda x, c=float(load): np.full_like(x, c))
    h = grid.h
    N = shape_functions(_GAUSS_X, h)
    F = np.zeros(grid.ndof + 2)
    for e in range(grid.n_elements):
        x = e * h + h * _GAUSS_X
        F[2 * e:2 * e + 4] += h * N @ (q(x) * _GAUSS_W)
    return F[2:]


# --------------------------------------------------------------------------
# oracles

def coercivity_min_eig(ops: Operators, params: PhysicalParams | None = None) -> float:
    """min over y of (EI y'Kb y - rho varpi^2 y'M0 y) / y'M0 y."""
    p = ops.params if params is None else params
    K = p.EI * ops.Kb - p.rho * p.varpi**2 * ops.M0
    try:
        w = sla.eigh(K, ops.M0, eigvals_only=True, subset_by_index=[0, 0])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("generalized eigensolver failed",
                             {"ndof": ops.ndof, "varpi": p.varpi}) from exc
    return float(w[0])


def beam_modes(ops: Operators, count: int) -> np.ndarray:
    """Smallest ``count`` eigenvalues (squared natural frequencies) of (EI Kb - rho varpi^2 M0, M)."""
    if not 1 <= count <= ops.ndof:
        raise ConfigurationError(f"count must be in [1, {ops.ndof}]")
    try:
        return sla.eigh(ops.stiffness(), ops.M, eigvals_only=True,
                        subset_by_index=[0, count - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("modal eigensolver failed", {"count": count}) from exc


def resolved_cutoff(ops: Operators) -> float:
    """Frequency of undamped mode ndof/4; modes above it are not resolved by the mesh."""
    k = max(ops.ndof // 4, 1)
    return float(np.sqrt(max(beam_modes(ops, k)[-1], 0.0)))


@dataclass(frozen=True)
class NodalSolution:
    grid: Grid
    dofs: np.ndarray

    @property
    def values(self):
        return full_dofs(self.grid, self.dofs)[0::2]

    @property
    def slopes(self):
        return full_dofs(self.grid, self.dofs)[1::2]

    @property
    def tip_deflection(self):
        return float(self.dofs[-2])

    @property
    def tip_slope(self):
        return float(self.dofs[-1])


def static_solve(ops: Operators, load) -> NodalSolution:
    """Solve EI Kb y = F for a distributed load q (constant or callable)."""
    F = load_vector(ops.grid, load)
    y = BandedSPD(ops.params.EI * ops.Kb).solve(F)
    if not np.all(np.isfinite(y)):
        raise NumericalError("static solve produced non-finite values")
    return NodalSolution(ops.grid, y)
