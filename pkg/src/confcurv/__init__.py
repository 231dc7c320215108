"""Conformal curvature toolkit.

Curvature tensors of closed-form metrics via exact derivative jets,
principal-symbol ellipticity certificates for the gauge-fixed conformal
operators, a variational solver for n-harmonic coordinates, and
frequency-space symbol smoothing experiments.
"""

from ._kernels import BACKEND as kernel_backend  # noqa: F401
from .curvature import (  # noqa: F401
    CurvatureBundle,
    PointTensor,
    bach,
    cotton,
    covariant_derivative,
    curvature_bundle,
    gauge_residual,
    obstruction4,
    p_harmonic_residual,
    schouten,
    weyl,
)
from .expr import differentiate, parse, to_string  # noqa: F401
from .metric import (  # noqa: F401
    MetricJet,
    MetricSpec,
    bundled_spec,
    bundled_spec_names,
    conformal_normalize,
    load_spec,
    metric_jet,
)
from .solver import Grid, GridMap, SolverConfig, n_energy, solve_dirichlet  # noqa: F401
from .symbols import (  # noqa: F401
    FrozenPoint,
    ellipticity_certificate,
    plane_wave_symbol_oracle,
    q_apply,
    weyl_contraction_identity,
)

__version__ = "0.1.0"
