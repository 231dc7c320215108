"""Variational construction of n-harmonic coordinates on a uniform grid.

Each candidate coordinate function u^j minimizes the regularized n-Dirichlet
energy  sum_j int (|du^j|_g^2 + eps^2)^{n/2} sqrt(det g) dx  with identity
boundary values, discretized with midpoint quadrature per cell and the
cell-centered gradient of the multilinear interpolant (corner-averaged
forward differences).  The discrete gradient below is the exact derivative
of the discrete energy, so optimizer line searches and the
finite-difference consistency checks share one functional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._kernels import cell_energy_gradient
from .errors import (
    InputError,
    LineSearchFailed,
    NonFiniteEnergy,
    NotDiffeomorphic,
)
from .metric import MetricSpec

__all__ = [
    "Grid", "GridMap", "SolverConfig", "SolveReport", "CellGeometry",
    "n_energy", "energy_gradient", "solve_dirichlet",
    "pullback_gauge_check", "GaugeCheck", "jacobian_determinants",
]


@dataclass
class Grid:
    box: np.ndarray     # (n, 2)
    shape: tuple        # nodes per axis, each >= 5

    def __post_init__(self):
        self.box = np.asarray(self.box, dtype=np.float64)
        self.shape = tuple(int(m) for m in self.shape)
        if len(self.shape) != self.box.shape[0]:
            raise InputError("grid shape and box dimension disagree")
        if any(m < 5 for m in self.shape):
            raise InputError(f"need at least 5 nodes per axis, got {self.shape}")
        if not np.all(self.box[:, 1] > self.box[:, 0]):
            raise InputError("box intervals must satisfy lo < hi")

    @property
    def n(self):
        return len(self.shape)

    @property
    def spacing(self):
        return (self.box[:, 1] - self.box[:, 0]) / (np.array(self.shape) - 1)

    @property
    def axes(self):
        return [np.linspace(lo, hi, m)
                for (lo, hi), m in zip(self.box, self.shape)]

    def node_coordinates(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def interior_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.n):
            sl = [slice(None)] * self.n
            sl[a] = 0
            mask[tuple(sl)] = False
            sl[a] = -1
            mask[tuple(sl)] = False
        return mask

    def cell_shape(self):
        return tuple(m - 1 for m in self.shape)

    def cell_centers(self):
        half = self.spacing / 2.0
        axes = [ax[:-1] + h for ax, h in zip(self.axes, half)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class GridMap:
    """n scalar grid functions with identity boundary values."""

    grid: Grid
    values: np.ndarray   # (n,) + grid.shape

    @classmethod
    def identity(cls, grid: Grid):
        mesh = np.meshgrid(*grid.axes, indexing="ij")
        return cls(grid=grid, values=np.stack(mesh, axis=0))

    def copy(self):
        return GridMap(grid=self.grid, values=self.values.copy())

    def flat(self):
        return self.values.reshape(self.grid.n, -1)

    def boundary_values(self):
        mask = ~self.grid.interior_mask()
        return self.values[:, mask]


class CellGeometry:
    """Per-cell quantities reused across every energy evaluation."""

    def __init__(self, spec: MetricSpec, grid: Grid, eps_reg: float = 1e-8):
        if spec.n != grid.n:
            raise InputError("metric dimension and grid dimension disagree")
        self.spec = spec
        self.grid = grid
        self.eps_reg = float(eps_reg)
        n = grid.n
        shape = grid.shape
        strides = np.array([int(np.prod(shape[a + 1:])) for a in range(n)],
                           dtype=np.int64)
        cell_idx = np.meshgrid(*[np.arange(m - 1) for m in shape], indexing="ij")
        self.base = sum(ci.ravel() * s for ci, s in zip(cell_idx, strides)).astype(np.int64)
        corners = list(product((0, 1), repeat=n))
        self.offsets = np.array([sum(c * s for c, s in zip(corner, strides))
                                 for corner in corners], dtype=np.int64)
        h = grid.spacing
        denom = 2.0 ** (n - 1)
        self.coeff = np.array(
            [[(1.0 if corner[a] else -1.0) / (denom * h[a]) for a in range(n)]
             for corner in corners])
        centers = grid.cell_centers()
        gvals = spec.values(centers)
        dets = np.linalg.det(gvals)
        if not np.all(dets > 0):
            raise NonFiniteEnergy("metric degenerate at a cell center")
        self.ginv = np.ascontiguousarray(np.linalg.inv(gvals))
        self.weight = np.ascontiguousarray(np.sqrt(dets) * np.prod(h))

    def energy_and_gradient(self, u: GridMap):
        flat = np.ascontiguousarray(u.flat())
        energy, grad = cell_energy_gradient(
            flat, self.base, self.offsets, self.coeff, self.ginv, self.weight,
            self.eps_reg ** 2, self.grid.n / 2.0)
        if not np.isfinite(energy):
            raise NonFiniteEnergy("energy evaluated non-finite")
        grad = grad.reshape(u.values.shape)
        grad[:, ~self.grid.interior_mask()] = 0.0
        return energy, grad

    def cell_gradients(self, u: GridMap):
        """Cell-centered Du: array (cells, n_funcs, n_axes)."""
        flat = u.flat()
        corners = np.stack([flat[:, self.base + off] for off in self.offsets],
                           axis=1)  # (F, S, C)
        return np.einsum("sa,jsc->cja", self.coeff, corners)

    def cell_values(self, u: GridMap):
        """u averaged over cell corners, i.e. its value at cell centers."""
        flat = u.flat()
        corners = np.stack([flat[:, self.base + off] for off in self.offsets],
                           axis=1)
        return corners.mean(axis=1).T  # (C, F)


def n_energy(spec: MetricSpec, grid: Grid, u: GridMap,
             eps_reg: float = 1e-8) -> float:
    geo = CellGeometry(spec, grid, eps_reg)
    energy, _ = geo.energy_and_gradient(u)
    return energy


def energy_gradient(spec: MetricSpec, grid: Grid, u: GridMap,
                    eps_reg: float = 1e-8) -> np.ndarray:
    geo = CellGeometry(spec, grid, eps_reg)
    _, grad = geo.energy_and_gradient(u)
    return grad


@dataclass
class SolverConfig:
    max_iter: int = 500
    tol: float = 1e-8          # sup-norm of the interior gradient
    eps_reg: float = 1e-8
    memory: int = 8
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-18


@dataclass
class SolveReport:
    energy: float
    gradient_sup: float
    iterations: int
    converged: bool
    min_jacobian: float
    diffeomorphic: bool
    energies: list = field(default_factory=list)
    gauge_max: float | None = None
    gauge_mean: float | None = None


def jacobian_determinants(grid: Grid, u: GridMap) -> np.ndarray:
    """det Du at interior nodes, Du by central differences."""
    n = grid.n
    h = grid.spacing
    core = tuple(slice(1, -1) for _ in range(n))
    jac = np.empty(tuple(m - 2 for m in grid.shape) + (n, n))
    for j in range(n):
        for a in range(n):
            up = [slice(1, -1)] * n
            dn = [slice(1, -1)] * n
            up[a] = slice(2, None)
            dn[a] = slice(0, -2)
            jac[..., j, a] = (u.values[j][tuple(up)]
                             - u.values[j][tuple(dn)]) / (2.0 * h[a])
    return np.linalg.det(jac).ravel()


def solve_dirichlet(spec: MetricSpec, grid: Grid,
                    config: SolverConfig | None = None):
    """Minimize the n-Dirichlet energy from the identity initialization.

    Limited-memory quasi-Newton descent with Armijo backtracking; boundary
    nodes never move.  Returns the map and a report; a non-positive
    Jacobian is flagged in the report rather than raised.
    """
    config = config or SolverConfig()
    geo = CellGeometry(spec, grid, config.eps_reg)
    u = GridMap.identity(grid)
    interior = grid.interior_mask()

    def pack(arr):
        return arr[:, interior].ravel()

    energy, grad = geo.energy_and_gradient(u)
    energies = [energy]
    g = pack(grad)
    history = []
    iterations = 0
    converged = float(np.abs(g).max()) < config.tol

    while not converged and iterations < config.max_iter:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(history):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if history:
            s, y, _ = history[-1]
            q *= (s @ y) / (y @ y)
        else:
            q *= 1.0 / max(np.linalg.norm(g), 1.0)
        for (s, y, rho), a in zip(history, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        direction = -q
        slope = float(direction @ g)
        if slope >= 0.0:
            direction = -g
            slope = float(direction @ g)

        step = 1.0
        accepted = False
        u_try = u.copy()
        while step > config.min_step:
            u_try.values[:, interior] = (u.values[:, interior].ravel()
                                         + step * direction).reshape(
                grid.n, -1)
            e_try, grad_try = geo.energy_and_gradient(u_try)
            if e_try <= energy + config.armijo * step * slope:
                accepted = True
                break
            step *= config.backtrack
        if not accepted:
            if float(np.abs(g).max()) < 10.0 * config.tol:
                break  # at numerical floor, close enough to declare done
            raise LineSearchFailed(
                f"no acceptable step at iteration {iterations} "
                f"(gradient sup {np.abs(g).max():.3e})")

        g_new = pack(grad_try)
        s_vec = step * direction
        y_vec = g_new - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-14 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            history.append((s_vec, y_vec, 1.0 / sy))
            if len(history) > config.memory:
                history.pop(0)
        u, energy, g = u_try, e_try, g_new
        energies.append(energy)
        iterations += 1
        converged = float(np.abs(g).max()) < config.tol

    jac = jacobian_determinants(grid, u)
    min_jac = float(jac.min())
    report = SolveReport(
        energy=energy,
        gradient_sup=float(np.abs(g).max()),
        iterations=iterations,
        converged=converged,
        min_jacobian=min_jac,
        diffeomorphic=bool(min_jac > 0.0),
        energies=energies,
    )
    if report.diffeomorphic:
        try:
            check = pullback_gauge_check(spec, grid, u)
            report.gauge_max = check.max_residual
            report.gauge_mean = check.mean_residual
        except NotDiffeomorphic:
            pass
    return u, report


# --- pulled-back gauge diagnostics -------------------------------------------

@dataclass
class GaugeCheck:
    max_residual: float
    mean_residual: float
    centers_used: int


def _gauge_residual_values(g, dg):
    """Gamma^k - Gamma~^k from metric values and first partials.

    g: (N, n, n); dg: (N, n, n, n) with dg[:, a, b, r] = d_r g_ab.
    """
    n = g.shape[1]
    ginv = np.linalg.inv(g)
    # Gamma^k_ab = 1/2 g^{kl} (d_a g_bl + d_b g_al - d_l g_ab)
    t = (np.einsum("cbla->clab", dg) + np.einsum("calb->clab", dg)
         - np.einsum("cabl->clab", dg))
    gamma = 0.5 * np.einsum("ckl,clab->ckab", ginv, t)
    gamma_up = np.einsum("cab,ckab->ck", ginv, gamma)
    tilde = np.empty_like(gamma_up)
    for k in range(n):
        num = np.einsum("cr,ca,cb,cabr->c",
                        ginv[:, k], ginv[:, k], ginv[:, k], dg)
        tilde[:, k] = -(n - 2) / 2.0 * num / ginv[:, k, k]
    return gamma_up - tilde


def pullback_gauge_check(spec: MetricSpec, grid: Grid, u: GridMap) -> GaugeCheck:
    """Gauge defect of the pulled-back metric on the image of the map.

    The pulled-back metric (Du)^{-T} g (Du)^{-1} is sampled at cell
    centers; its first partials on the (distorted) image grid come from a
    local least-squares quadratic fit over the 3^n neighborhood.
    """
    geo = CellGeometry(spec, grid, 0.0)
    n = grid.n
    du = geo.cell_gradients(u)                  # (C, j, a)
    dets = np.linalg.det(du)
    if np.any(dets <= 0.0):
        raise NotDiffeomorphic(
            f"non-positive Jacobian at {int(np.sum(dets <= 0))} cell centers")
    du_inv = np.linalg.inv(du)                  # (C, a, j)
    gvals = spec.values(grid.cell_centers())
    pulled = np.einsum("caj,cab,cbk->cjk", du_inv, gvals, du_inv)
    ycoords = geo.cell_values(u)                # (C, n)

    cells = grid.cell_shape()
    if any(m < 3 for m in cells):
        raise InputError("pullback check needs at least 3 cells per axis")
    pulled_grid = pulled.reshape(cells + (n, n))
    y_grid = ycoords.reshape(cells + (n,))

    core = tuple(slice(1, -1) for _ in range(n))
    offsets = list(product((-1, 0, 1), repeat=n))
    center_y = y_grid[core]
    neigh_y = np.stack([y_grid[tuple(slice(1 + o, (m - 1) + o)
                                     for o, m in zip(off, cells))]
                        for off in offsets], axis=-2)   # (..., 27, n)
    neigh_g = np.stack([pulled_grid[tuple(slice(1 + o, (m - 1) + o)
                                          for o, m in zip(off, cells))]
                        for off in offsets], axis=-3)   # (..., 27, n, n)
    dy = neigh_y - center_y[..., None, :]

    # quadratic least-squares model: [1, dy_a, dy_a dy_b (a<=b)]
    columns = [np.ones(dy.shape[:-1])]
    for a in range(n):
        columns.append(dy[..., a])
    for a in range(n):
        for b in range(a, n):
            columns.append(dy[..., a] * dy[..., b])
    design = np.stack(columns, axis=-1)                  # (..., 27, P)
    pinv = np.linalg.pinv(design)                        # (..., P, 27)
    flat_g = neigh_g.reshape(neigh_g.shape[:-2] + (n * n,))
    coef = np.einsum("...ps,...sk->...pk", pinv, flat_g)
    grads = coef[..., 1:1 + n, :]                        # (..., n, n*n)
    grads = np.moveaxis(grads, -2, -1).reshape(center_y.shape[:-1] + (n, n, n))
    # grads[..., a, b, r] = d_r of pulled_ab

    g_flat = pulled_grid[core].reshape(-1, n, n)
    dg_flat = grads.reshape(-1, n, n, n)
    residuals = np.abs(_gauge_residual_values(g_flat, dg_flat))
    return GaugeCheck(max_residual=float(residuals.max()),
                      mean_residual=float(residuals.mean()),
                      centers_used=g_flat.shape[0])
