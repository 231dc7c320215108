"""Pointwise curvature and gauge quantities of a Riemannian metric.

Index conventions, fixed once for the whole package:

* Christoffel symbols   Gamma^k_ab = 1/2 g^{kl} (d_a g_bl + d_b g_al - d_l g_ab)
* Riemann (all down)    R_abcd = d_a Gamma^m_bc g_md + Gamma^m_bc Gamma^r_am g_rd - (a <-> b)
* Ricci                 R_bc = g^{ad} R_abcd,  scalar R = g^{bc} R_bc
* Schouten              P_ab = (R_ab - R g_ab / (2(n-1))) / (n-2)
* Weyl                  W_abcd = R_abcd + P_ac g_bd - P_bc g_ad + P_bd g_ac - P_ad g_bc
* Cotton                C_abc = nabla_a P_bc - nabla_b P_ac
* Bach                  B_ab = nabla^k nabla^l W_akbl + 1/2 R^kl W_akbl
* covariant derivative appends its index last:
  (nabla F)_{i1..ik m} = d_m F_{i1..ik} - sum_s F_{i1..p..ik} Gamma^p_{m i_s}

Every derivative of a curvature quantity is carried as a jet (exact tables),
never re-differenced numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr as ex
from ._kernels import compile_exprs, eval_tape
from .errors import (
    DegenerateGradient,
    DimensionTooSmall,
    InsufficientJetOrder,
    UnsupportedDimension,
    VarianceMismatch,
)
from .jets import Jet, jet_einsum, jet_exp, jet_power
from .metric import MetricJet, MetricSpec, metric_jet

__all__ = [
    "PointTensor", "CurvatureBundle", "CurvatureJets", "BachResult",
    "CottonResult", "ObstructionResult",
    "curvature_jets", "curvature_bundle", "schouten", "weyl", "cotton",
    "bach", "obstruction4", "covariant_derivative", "gauge_residual",
    "gauge_vectors", "p_harmonic_residual",
]

DIMENSION_CAP = 6  # dense rank-4 tables stay tiny up to here


def _check_dim(n):
    if n > DIMENSION_CAP:
        raise UnsupportedDimension(
            f"curvature operations are capped at dimension {DIMENSION_CAP} "
            f"(got {n}); raise confcurv.curvature.DIMENSION_CAP to override")


@dataclass
class PointTensor:
    """Dense tensor components at a point with per-slot variance flags."""

    n: int
    variance: tuple          # 'd' (covariant) / 'u' (contravariant) per slot
    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=np.float64)
        if self.components.shape != (self.n,) * len(self.variance):
            raise VarianceMismatch(
                f"component shape {self.components.shape} does not match "
                f"rank {len(self.variance)} in dimension {self.n}")

    @property
    def rank(self):
        return len(self.variance)

    def max_abs(self):
        return float(np.abs(self.components).max()) if self.components.size else 0.0

    def _move_slot(self, slot, matrix, new_flag):
        letters = "abcdefgh"[: self.rank]
        src = letters[slot]
        spec = f"{letters},z{src}->{letters.replace(src, 'z')}"
        comps = np.einsum(spec, self.components, matrix)
        variance = list(self.variance)
        variance[slot] = new_flag
        return PointTensor(self.n, tuple(variance), comps)

    def raise_slot(self, slot, ginv):
        if self.variance[slot] != "d":
            raise VarianceMismatch(f"slot {slot} is already contravariant")
        return self._move_slot(slot, ginv, "u")

    def lower_slot(self, slot, g):
        if self.variance[slot] != "u":
            raise VarianceMismatch(f"slot {slot} is already covariant")
        return self._move_slot(slot, g, "d")


@dataclass
class CurvatureBundle:
    """Values of the connection and curvature quantities at one point."""

    x: np.ndarray
    n: int
    christoffel: PointTensor   # Gamma^k_ab stored [k, a, b]
    gamma_up: np.ndarray       # Gamma^k = g^{ab} Gamma^k_ab
    gamma_down: np.ndarray     # Gamma_k = g_kl Gamma^l
    riemann: PointTensor       # R_abcd
    ricci: PointTensor         # R_bc
    scalar: float
    schouten: PointTensor      # P_ab


class CurvatureJets:
    """Lazily built jets of the curvature chain for one metric jet."""

    def __init__(self, mjet: MetricJet):
        _check_dim(mjet.n)
        self.mjet = mjet
        self.n = mjet.n

    @cached_property
    def gamma(self) -> Jet:
        mj = self.mjet
        dg = mj.g.partial()                      # [j, k, d] = d_d g_jk
        t1 = dg.contract("bla->lab")             # d_a g_bl
        t2 = dg.contract("alb->lab")             # d_b g_al
        t3 = dg.contract("abl->lab")             # d_l g_ab
        s = t1 + t2 - t3
        return jet_einsum("kl,lab->kab", mj.ginv, s).scale(0.5)

    @cached_property
    def gamma_up(self) -> Jet:
        return jet_einsum("ab,kab->k", self.mjet.ginv, self.gamma)

    @cached_property
    def gamma_down(self) -> Jet:
        return jet_einsum("kl,l->k", self.mjet.g.truncated(self.gamma_up.order),
                          self.gamma_up)

    @cached_property
    def riemann(self) -> Jet:
        mj = self.mjet
        if mj.order < 2:
            raise InsufficientJetOrder("curvature needs a metric jet of order >= 2")
        dgamma = self.gamma.partial()            # [m, b, c, e] = d_e Gamma^m_bc
        g = mj.g.truncated(dgamma.order)
        a1 = jet_einsum("mbca,md->abcd", dgamma, g)
        tmp = jet_einsum("mbc,ram->rabc", self.gamma.truncated(dgamma.order),
                         self.gamma.truncated(dgamma.order))
        q1 = jet_einsum("rabc,rd->abcd", tmp, g)
        t = a1 + q1
        return t - t.contract("abcd->bacd")

    @cached_property
    def ricci(self) -> Jet:
        return jet_einsum("ad,abcd->bc",
                          self.mjet.ginv.truncated(self.riemann.order), self.riemann)

    @cached_property
    def scalar(self) -> Jet:
        return jet_einsum("bc,bc->",
                          self.mjet.ginv.truncated(self.ricci.order), self.ricci)

    @cached_property
    def schouten(self) -> Jet:
        n = self.n
        if n < 3:
            raise DimensionTooSmall("the Schouten tensor needs dimension >= 3")
        g = self.mjet.g.truncated(self.scalar.order)
        sg = jet_einsum(",bc->bc", self.scalar, g)
        return (self.ricci - sg.scale(1.0 / (2 * (n - 1)))).scale(1.0 / (n - 2))

    @cached_property
    def weyl(self) -> Jet:
        p = self.schouten
        g = self.mjet.g.truncated(p.order)
        pg = jet_einsum("ac,bd->acbd", p, g)
        w = self.riemann.truncated(p.order)
        w = w + pg.contract("acbd->abcd")   # + P_ac g_bd
        w = w - pg.contract("bcad->abcd")   # - P_bc g_ad
        w = w + pg.contract("bdac->abcd")   # + P_bd g_ac
        w = w - pg.contract("adbc->abcd")   # - P_ad g_bc
        return w

    @cached_property
    def nabla_schouten(self) -> Jet:
        return covariant_derivative_jet(self.schouten, self.gamma)

    @cached_property
    def nabla_weyl(self) -> Jet:
        return covariant_derivative_jet(self.weyl, self.gamma)


def covariant_derivative_jet(tensor: Jet, gamma: Jet) -> Jet:
    """Covariant derivative of an all-covariant tensor jet, new slot last."""
    if tensor.order < 1:
        raise InsufficientJetOrder(
            "covariant derivative needs at least an order-1 jet of the tensor")
    rank = len(tensor.comp_shape)
    letters = "abcdeh"[:rank]
    out = tensor.partial()
    order = min(out.order, gamma.order)
    out = out.truncated(order)
    t = tensor.truncated(order)
    gam = gamma.truncated(order)
    for s in range(rank):
        src = letters.replace(letters[s], "p")
        corr = jet_einsum(f"{src},pq{letters[s]}->{letters}q", t, gam)
        out = out - corr
    return out


def curvature_jets(mjet: MetricJet) -> CurvatureJets:
    return CurvatureJets(mjet)


def curvature_bundle(mjet: MetricJet) -> CurvatureBundle:
    """Connection and curvature values at the jet's base point."""
    if mjet.order < 2:
        raise InsufficientJetOrder("curvature_bundle needs a metric jet of order >= 2")
    cj = CurvatureJets(mjet)
    n = mjet.n
    return CurvatureBundle(
        x=mjet.x,
        n=n,
        christoffel=PointTensor(n, ("u", "d", "d"), cj.gamma.value),
        gamma_up=cj.gamma_up.value.copy(),
        gamma_down=cj.gamma_down.value.copy(),
        riemann=PointTensor(n, ("d",) * 4, cj.riemann.value),
        ricci=PointTensor(n, ("d", "d"), cj.ricci.value),
        scalar=float(cj.scalar.value),
        schouten=PointTensor(n, ("d", "d"), cj.schouten.value),
    )


def schouten(bundle: CurvatureBundle, mjet: MetricJet) -> PointTensor:
    n = bundle.n
    if n < 3:
        raise DimensionTooSmall("the Schouten tensor needs dimension >= 3")
    comps = (bundle.ricci.components
             - bundle.scalar * mjet.g_value / (2.0 * (n - 1))) / (n - 2)
    return PointTensor(n, ("d", "d"), comps)


def weyl(bundle: CurvatureBundle, mjet: MetricJet, variance: str = "all_down") -> PointTensor:
    """Weyl tensor, either all-covariant or with the last index raised.

    ``last_up`` evaluates the mixed-index form directly (with Kronecker
    deltas) rather than raising the lowered output; the two agree after
    raising the last slot.
    """
    n = bundle.n
    g = mjet.g_value
    ginv = mjet.ginv_value
    p = bundle.schouten.components
    r = bundle.riemann.components
    if variance == "all_down":
        comps = (r
                 + np.einsum("ac,bd->abcd", p, g) - np.einsum("bc,ad->abcd", p, g)
                 + np.einsum("bd,ac->abcd", p, g) - np.einsum("ad,bc->abcd", p, g))
        return PointTensor(n, ("d",) * 4, comps)
    if variance == "last_up":
        rm = np.einsum("abcm,md->abcd", r, ginv)
        delta = np.eye(n)
        pmix = np.einsum("bm,md->bd", p, ginv)
        comps = (rm
                 + np.einsum("ac,bd->abcd", p, delta) - np.einsum("bc,ad->abcd", p, delta)
                 + np.einsum("bd,ac->abcd", pmix, g) - np.einsum("ad,bc->abcd", pmix, g))
        return PointTensor(n, ("d", "d", "d", "u"), comps)
    raise VarianceMismatch(f"variance must be 'all_down' or 'last_up', got {variance!r}")


@dataclass
class CottonResult:
    tensor: PointTensor                 # C_abc from the Schouten form
    weyl_divergence: PointTensor | None  # nabla^l W_abcl / (3-n), n >= 4

    def cross_check_defect(self):
        if self.weyl_divergence is None:
            return 0.0
        return float(np.abs(self.tensor.components
                            - self.weyl_divergence.components).max())


def _cotton_from_jets(cj: CurvatureJets) -> CottonResult:
    n = cj.n
    nab_p = cj.nabla_schouten.value            # [b, c, m] = nabla_m P_bc
    c = nab_p.transpose(2, 0, 1) - nab_p.transpose(0, 2, 1)
    tensor = PointTensor(n, ("d",) * 3, c)
    weyl_div = None
    if n >= 4:
        # nabla^l W_abcl = (n-3) C_abc in these conventions (the second
        # Bianchi identity fixes the sign; see tests for the numeric proof)
        div = np.einsum("le,abcle->abc", cj.mjet.ginv_value, cj.nabla_weyl.value)
        weyl_div = PointTensor(n, ("d",) * 3, div / (n - 3.0))
    return CottonResult(tensor=tensor, weyl_divergence=weyl_div)


def cotton(spec: MetricSpec, x, full: bool = False):
    """Cotton tensor at a point (pass ``full=True`` for both displayed forms)."""
    mjet = metric_jet(spec, x, order=3)
    result = _cotton_from_jets(CurvatureJets(mjet))
    return result if full else result.tensor


@dataclass
class BachResult:
    tensor: PointTensor       # divergence-of-Weyl form
    alternate: PointTensor    # double-Schouten form
    asymmetry: float          # max |B_ab - B_ba|, reported, not asserted

    def cross_check_defect(self):
        scale = max(self.tensor.max_abs(), 1.0)
        return float(np.abs(self.tensor.components
                            - self.alternate.components).max()) / scale


def _bach_from_jets(cj: CurvatureJets) -> BachResult:
    n = cj.n
    mj = cj.mjet
    if mj.order < 4:
        raise InsufficientJetOrder("the Bach tensor needs a metric jet of order 4")
    ginv = mj.ginv_value
    nabla2_w = covariant_derivative_jet(cj.nabla_weyl, cj.gamma).value
    b1 = np.einsum("kf,le,akblef->ab", ginv, ginv, nabla2_w)
    ricci_up = np.einsum("km,ln,mn->kl", ginv, ginv, cj.ricci.value)
    b2 = 0.5 * np.einsum("kl,akbl->ab", ricci_up, cj.weyl.value)
    bach_div = b1 + b2

    # alternate (double-Schouten) form; the (n-3) prefactor pairs with the
    # divergence identity nabla^l W_abcl = (n-3) C_abc of these conventions
    nabla2_p = covariant_derivative_jet(cj.nabla_schouten, cj.gamma).value
    lap_p = np.einsum("kf,abkf->ab", ginv, nabla2_p)
    cross = np.einsum("kf,bkaf->ab", ginv, nabla2_p)
    bach_alt = (n - 3.0) * (-lap_p + cross) + b2

    asym = float(np.abs(bach_div - bach_div.T).max())
    return BachResult(
        tensor=PointTensor(n, ("d", "d"), bach_div),
        alternate=PointTensor(n, ("d", "d"), bach_alt),
        asymmetry=asym,
    )


def bach(spec: MetricSpec, x) -> BachResult:
    """Bach tensor at a point, in both displayed forms."""
    mjet = metric_jet(spec, x, order=4)
    return _bach_from_jets(CurvatureJets(mjet))


@dataclass
class ObstructionResult:
    tensor: PointTensor              # O_ab (= Bach in dimension 4)
    conformal_invariant: PointTensor  # det(g)^{(n-2)/(2n)} O_ab
    bach: BachResult


def obstruction4(spec: MetricSpec, x) -> ObstructionResult:
    """Dimension-4 obstruction tensor with its conformally invariant density."""
    if spec.n != 4:
        raise UnsupportedDimension(
            "the obstruction tensor is implemented only in dimension 4, "
            f"got n={spec.n}")
    mjet = metric_jet(spec, x, order=4)
    result = _bach_from_jets(CurvatureJets(mjet))
    weight = mjet.det ** ((spec.n - 2) / (2.0 * spec.n))
    invariant = PointTensor(4, ("d", "d"), weight * result.tensor.components)
    return ObstructionResult(tensor=result.tensor,
                             conformal_invariant=invariant, bach=result)


def covariant_derivative(tensor: PointTensor, bundle: CurvatureBundle,
                         partials: np.ndarray) -> PointTensor:
    """Covariant derivative of an all-covariant tensor from caller-supplied partials.

    ``partials[..., m]`` must hold d_m of the components (exact values from
    the symbolic pipeline); the new covariant slot is appended last.
    """
    if any(v != "d" for v in tensor.variance):
        raise VarianceMismatch("covariant_derivative expects an all-covariant tensor")
    partials = np.asarray(partials, dtype=np.float64)
    if partials.shape != tensor.components.shape + (tensor.n,):
        raise VarianceMismatch("partials must extend the component shape by one axis")
    rank = tensor.rank
    letters = "abcdeh"[:rank]
    out = partials.copy()
    gam = bundle.christoffel.components
    for s in range(rank):
        src = letters.replace(letters[s], "p")
        out -= np.einsum(f"{src},pq{letters[s]}->{letters}q", tensor.components, gam)
    return PointTensor(tensor.n, tensor.variance + ("d",), out)


# --- gauge quantities --------------------------------------------------------

def gauge_vectors(mjet: MetricJet):
    """Contracted Christoffel Gamma^k and its gauge counterpart.

    The second vector is the coordinate-dependent display
    -((n-2)/2) * (g^{kr} g^{ka} g^{kb} / g^{kk}) d_r g_ab, in which k is a
    fixed (not summed) index; the two agree exactly in an n-harmonic chart.
    """
    n = mjet.n
    cj = CurvatureJets(mjet)
    gamma_up = cj.gamma_up.value.copy()
    ginv = mjet.ginv_value
    dg = mjet.g.tables[1]  # [a, b, r] = d_r g_ab
    tilde = np.empty(n)
    for k in range(n):  # k is a fixed index here, deliberately not summed
        num = np.einsum("r,a,b,abr->", ginv[k], ginv[k], ginv[k], dg)
        tilde[k] = -(n - 2) / 2.0 * num / ginv[k, k]
    return gamma_up, tilde


def gauge_residual(mjet: MetricJet) -> np.ndarray:
    """Componentwise defect Gamma^k - Gamma~^k of the n-harmonic gauge identity."""
    gamma_up, tilde = gauge_vectors(mjet)
    return gamma_up - tilde


def p_harmonic_residual(spec: MetricSpec, u: ex.Expr, p: float, x) -> float:
    """delta(|du|^{p-2} du) at x, via the divergence-form expression.

    Evaluates -|g|^{-1/2} d_i(|g|^{1/2} g^{ij} |du|_g^{p-2} d_j u) with every
    derivative taken symbolically.
    """
    if isinstance(u, str):
        u = ex.parse(u, spec.n)
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    n = spec.n
    mjet = metric_jet(spec, x, order=2)

    # jet of du (components d_j u, first-order tables d_d d_j u)
    grads = [ex.differentiate(u, j) for j in range(1, n + 1)]
    exprs = grads + [ex.differentiate(gj, d) for gj in grads
                     for d in range(1, n + 1)]
    flat = eval_tape(compile_exprs(exprs, n), np.asarray(x, dtype=np.float64))[0]
    du0 = flat[:n]
    du1 = flat[n:].reshape(n, n)
    du1 = 0.5 * (du1 + du1.T)
    du = Jet(n, 1, [du0, du1])

    ginv = mjet.ginv.truncated(1)
    raised = jet_einsum("ij,j->i", ginv, du)
    normsq = jet_einsum("i,i->", raised, du)
    if float(normsq.value) < 1e-24:
        raise DegenerateGradient(f"|du| < 1e-12 at x={np.asarray(x).tolist()}")
    weight = jet_power(normsq, (p - 2.0) / 2.0)
    sqrtg = jet_exp(mjet.logdet.scale(0.5)).truncated(1)
    flux = jet_einsum(",i->i", jet_einsum(",->", sqrtg, weight), raised)
    divergence = float(np.trace(flux.tables[1]))
    return -divergence / float(sqrtg.value)
