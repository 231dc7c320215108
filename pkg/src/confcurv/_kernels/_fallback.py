"""Pure-NumPy implementations of the hot kernels.

Semantics match ``_native`` exactly; the tape evaluator vectorizes over
points, the cell kernel over grid cells.
"""

from __future__ import annotations

import numpy as np

from .tape import ADD, MUL, DIV, POWI, EXP, LOG, SIN, COS, SQRT


def eval_tape(tape, points):
    """Evaluate all tape outputs at ``points`` (P, n_vars) -> (P, n_out)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    n_points = points.shape[0]
    slots = np.empty((tape.n_slots, n_points), dtype=np.float64)
    nc = tape.consts.shape[0]
    slots[:nc] = tape.consts[:, None]
    slots[nc:nc + tape.n_vars] = points.T
    base = nc + tape.n_vars
    ops = tape.ops
    # non-finite values are legitimate data here: callers check outputs and
    # raise their own evaluation errors (matches the compiled kernel)
    with np.errstate(all="ignore"):
        for i in range(ops.shape[0]):
            opcode, a, b = ops[i]
            if opcode == ADD:
                slots[base + i] = slots[a] + slots[b]
            elif opcode == MUL:
                slots[base + i] = slots[a] * slots[b]
            elif opcode == DIV:
                slots[base + i] = slots[a] / slots[b]
            elif opcode == POWI:
                slots[base + i] = slots[a] ** int(b)
            elif opcode == EXP:
                slots[base + i] = np.exp(slots[a])
            elif opcode == LOG:
                slots[base + i] = np.log(slots[a])
            elif opcode == SIN:
                slots[base + i] = np.sin(slots[a])
            elif opcode == COS:
                slots[base + i] = np.cos(slots[a])
            elif opcode == SQRT:
                slots[base + i] = np.sqrt(slots[a])
            else:
                raise AssertionError(opcode)
    return slots[tape.outputs].T.copy()


def cell_energy_gradient(u, base, offsets, coeff, ginv, weight, eps2, power):
    """Regularized p-Dirichlet energy and its gradient on a cell complex.

    u        (F, N) flattened nodal values per coordinate function
    base     (C,)   flat node index of each cell's low corner
    offsets  (S,)   flat offsets of the 2^n cell corners
    coeff    (S, n) corner weights of the cell-centered gradient
    ginv     (C, n, n) inverse metric at cell centers
    weight   (C,)   sqrt(det g) * cell volume
    """
    u = np.asarray(u, dtype=np.float64)
    n_funcs = u.shape[0]
    n_corners = offsets.shape[0]
    corners = np.empty((n_funcs, n_corners, base.shape[0]), dtype=np.float64)
    for s in range(n_corners):
        corners[:, s, :] = u[:, base + offsets[s]]
    # cell-centered gradient D[j, a, c]
    D = np.einsum("sa,jsc->jac", coeff, corners)
    q = np.einsum("cab,jac,jbc->jc", ginv, D, D)
    s_reg = q + eps2
    energy = float(np.dot((s_reg ** power).sum(axis=0), weight))
    dphi = power * s_reg ** (power - 1.0)
    G = np.einsum("c,jc,cab,jbc->jac", 2.0 * weight, dphi, ginv, D)
    grad = np.zeros_like(u)
    for s in range(n_corners):
        idx = base + offsets[s]
        grad[:, idx] += np.einsum("a,jac->jc", coeff[s], G)
    return energy, grad
