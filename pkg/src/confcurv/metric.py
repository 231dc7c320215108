"""Metric specifications and exact derivative jets.

A :class:`MetricSpec` holds closed-form component expressions g_jk(x) on a
box; :func:`metric_jet` evaluates the components and all partials up to
order 4 at a point by compiling the symbolically differentiated expression
trees to a single tape.  Inverse-metric and log-determinant jets are
derived from the g tables by exact jet calculus, so every downstream
curvature quantity is free of finite-difference error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

from . import expr as ex
from ._kernels import compile_exprs, eval_tape
from .errors import DomainError, EvalError, InputError, NotSPD, VariableOutOfRange
from .jets import Jet, jet_einsum, jet_exp, jet_from_gradient, jet_matinv

__all__ = [
    "MetricSpec", "MetricJet", "metric_jet", "conformal_normalize",
    "load_spec", "bundled_spec", "bundled_spec_names",
    "rescaled_spec", "perturbed_spec", "euclidean_spec",
]

VALIDATION_POINTS_PER_AXIS = 5
VALIDATION_CAP = 1024
MAX_JET_ORDER = 4


class MetricSpec:
    """Dimension, domain box, and symmetric matrix of component expressions."""

    def __init__(self, n, box, components, name="metric", validate=True):
        self.n = int(n)
        self.box = np.asarray(box, dtype=np.float64)
        self.name = name
        if self.n < 3:
            raise InputError(f"dimension must be at least 3, got {self.n}")
        if self.box.shape != (self.n, 2):
            raise InputError(f"box must have shape ({self.n}, 2)")
        if not np.all(self.box[:, 0] < self.box[:, 1]):
            raise InputError("each box interval must satisfy lo < hi")

        comp = [[self._coerce(components[j][k]) for k in range(self.n)]
                for j in range(self.n)]
        # symmetrize on load when the trees differ
        for j in range(self.n):
            for k in range(j + 1, self.n):
                if comp[j][k] is not comp[k][j]:
                    mean = ex.mul(ex.const(0.5), ex.add(comp[j][k], comp[k][j]))
                    comp[j][k] = comp[k][j] = mean
        self.components = comp
        self._tapes = {}
        self._value_tape = None
        if validate:
            self.validate()

    def _coerce(self, item):
        if isinstance(item, ex.Expr):
            e = item
        elif isinstance(item, str):
            e = ex.parse(item, self.n)
        else:
            e = ex.const(float(item))
        if ex.max_var_index(e) > self.n:
            raise VariableOutOfRange(
                f"component uses x{ex.max_var_index(e)} but dimension is {self.n}")
        return e

    # --- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, data, validate=True):
        return cls(data["n"], data["box"], data["g"],
                   name=data.get("name", "metric"), validate=validate)

    def to_dict(self):
        return {
            "name": self.name,
            "n": self.n,
            "box": self.box.tolist(),
            "g": [[ex.to_string(e) for e in row] for row in self.components],
        }

    # --- evaluation ---------------------------------------------------------

    def _upper_indices(self):
        return [(j, k) for j in range(self.n) for k in range(j, self.n)]

    def value_tape(self):
        if self._value_tape is None:
            exprs = [self.components[j][k] for j, k in self._upper_indices()]
            self._value_tape = compile_exprs(exprs, self.n)
        return self._value_tape

    def values(self, points):
        """Evaluate g at a batch of points: (P, n) -> (P, n, n)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        flat = eval_tape(self.value_tape(), points)
        out = np.empty((points.shape[0], self.n, self.n))
        for idx, (j, k) in enumerate(self._upper_indices()):
            out[:, j, k] = flat[:, idx]
            out[:, k, j] = flat[:, idx]
        return out

    def derivative_tape(self, order):
        """Tape producing all sorted-multi-index partials of g up to ``order``."""
        cached = self._tapes.get(order)
        if cached is not None:
            return cached
        exprs, layout = [], []
        for j, k in self._upper_indices():
            base = self.components[j][k]
            for length in range(order + 1):
                for alpha in combinations_with_replacement(range(1, self.n + 1), length):
                    e = base
                    for axis in alpha:
                        e = ex.differentiate(e, axis)
                    exprs.append(e)
                    layout.append((j, k, alpha))
        tape = compile_exprs(exprs, self.n)
        self._tapes[order] = (tape, layout)
        return tape, layout

    def derivative_tables(self, x, order):
        """Symmetric derivative tables [g, dg, ddg, ...] at a single point."""
        tape, layout = self.derivative_tape(order)
        flat = eval_tape(tape, np.asarray(x, dtype=np.float64))[0]
        if not np.all(np.isfinite(flat)):
            raise EvalError(f"non-finite metric derivative at x={list(x)}")
        n = self.n
        tables = [np.zeros((n, n) + (n,) * k) for k in range(order + 1)]
        for value, (j, k, alpha) in zip(flat, layout):
            table = tables[len(alpha)]
            for perm in set(permutations(alpha)):
                sl = tuple(a - 1 for a in perm)
                table[(j, k) + sl] = value
                table[(k, j) + sl] = value
        return tables

    # --- validation ---------------------------------------------------------

    def validation_lattice(self):
        axes = [np.linspace(lo, hi, VALIDATION_POINTS_PER_AXIS)
                for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        if points.shape[0] > VALIDATION_CAP:
            sel = np.unique(np.linspace(0, points.shape[0] - 1,
                                        VALIDATION_CAP).astype(int))
            points = points[sel]
        return points

    def validate(self):
        points = self.validation_lattice()
        values = self.values(points)
        if not np.all(np.isfinite(values)):
            bad = points[~np.all(np.isfinite(values), axis=(1, 2))][0]
            raise EvalError(f"metric evaluates non-finite at sample x={bad.tolist()}")
        for p, gmat in zip(points, values):
            try:
                np.linalg.cholesky(gmat)
            except np.linalg.LinAlgError:
                raise NotSPD(f"metric not positive definite at sample x={p.tolist()}")
        return True


@dataclass
class MetricJet:
    """Point values of g with exact partials, inverse, and log-determinant."""

    x: np.ndarray
    n: int
    order: int
    g: Jet        # comp (n, n), derivative order = order
    ginv: Jet     # comp (n, n), order min(order-1, 3)
    logdet: Jet   # scalar, order ginv.order + 1
    det: float

    @property
    def g_value(self):
        return self.g.tables[0]

    @property
    def ginv_value(self):
        return self.ginv.tables[0]


def _assemble_jet(x, n, order, g_jet):
    g0 = g_jet.tables[0]
    try:
        np.linalg.cholesky(g0)
    except np.linalg.LinAlgError:
        raise NotSPD(f"metric not positive definite at x={np.asarray(x).tolist()}")
    det = float(np.linalg.det(g0))
    ginv_order = max(0, min(order - 1, 3))
    ginv = jet_matinv(g_jet.truncated(ginv_order))
    dg = g_jet.partial()  # comp (n, n, a) = d_a g_jk
    grad_logdet = jet_einsum("jk,jka->a", ginv, dg.truncated(ginv.order))
    logdet = jet_from_gradient(np.log(det), grad_logdet)
    return MetricJet(x=np.asarray(x, dtype=np.float64), n=n, order=order,
                     g=g_jet, ginv=ginv, logdet=logdet, det=det)


def metric_jet(spec: MetricSpec, x, order: int = 4) -> MetricJet:
    """Exact metric jet at an interior point."""
    if not 1 <= order <= MAX_JET_ORDER:
        raise InputError(f"jet order must be in 1..{MAX_JET_ORDER}, got {order}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n,):
        raise DomainError(f"point must have {spec.n} coordinates")
    if not np.all((spec.box[:, 0] < x) & (x < spec.box[:, 1])):
        raise DomainError(f"point {x.tolist()} is not strictly inside the box")
    tables = spec.derivative_tables(x, order)
    g_jet = Jet(spec.n, order, tables)
    return _assemble_jet(x, spec.n, order, g_jet)


def conformal_normalize(mjet: MetricJet) -> MetricJet:
    """Jet of the unit-determinant conformal representative det(g)^{-1/n} g."""
    scale = jet_exp(mjet.logdet.scale(-1.0 / mjet.n))
    order = min(mjet.order, scale.order)
    ghat = jet_einsum(",jk->jk", scale.truncated(order), mjet.g.truncated(order))
    return _assemble_jet(mjet.x, mjet.n, order, ghat)


# --- spec constructors and bundled examples ---------------------------------

def euclidean_spec(n, half_width=1.0, name=None):
    comps = [[ex.const(1.0 if j == k else 0.0) for k in range(n)] for j in range(n)]
    box = [[-half_width, half_width]] * n
    return MetricSpec(n, box, comps, name=name or f"flat_n{n}")


def rescaled_spec(spec: MetricSpec, factor: ex.Expr, name=None) -> MetricSpec:
    """Pointwise conformal rescaling c(x) * g with a positive factor."""
    comps = [[ex.mul(factor, spec.components[j][k]) for k in range(spec.n)]
             for j in range(spec.n)]
    return MetricSpec(spec.n, spec.box, comps,
                      name=name or f"{spec.name}_rescaled", validate=False)


def perturbed_spec(spec: MetricSpec, h, factor: ex.Expr, name=None) -> MetricSpec:
    """g + h * factor(x) for a constant symmetric matrix h."""
    h = np.asarray(h, dtype=np.float64)
    comps = []
    for j in range(spec.n):
        row = []
        for k in range(spec.n):
            base = spec.components[j][k]
            if h[j, k] == 0.0:
                row.append(base)
            else:
                row.append(ex.add(base, ex.mul(ex.const(h[j, k]), factor)))
        comps.append(row)
    return MetricSpec(spec.n, spec.box, comps,
                      name=name or f"{spec.name}_perturbed", validate=False)


def load_spec(path) -> MetricSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return MetricSpec.from_dict(json.load(fh))


def bundled_spec_names():
    from importlib import resources
    names = []
    for item in resources.files("confcurv.specs").iterdir():
        if item.name.endswith(".json"):
            names.append(item.name[:-5])
    return sorted(names)


def bundled_spec(name) -> MetricSpec:
    from importlib import resources
    ref = resources.files("confcurv.specs") / f"{name}.json"
    if not ref.is_file():
        raise InputError(f"no bundled metric named '{name}' "
                         f"(available: {', '.join(bundled_spec_names())})")
    return MetricSpec.from_dict(json.loads(ref.read_text(encoding="utf-8")))
