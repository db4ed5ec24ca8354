"""Numerical laboratory for gradient conformal and Yamabe solitons.

Modules: ``expr`` (expressions and jets), ``tensor`` (dense tensors),
``chart`` (curvature on coordinate charts), ``conformal`` (Schouten, Cotton,
Weyl, Cao-Chen), ``warped`` (warped-product closed forms), ``soliton``
(profile ODE, branches, level sets), ``verify`` (property suite), ``cli``.
"""

from .chart import MetricChart, christoffel, covariant_derivative, hessian, ricci_scalar, riemann
from .conformal import cao_chen, cotton, div_cotton, cotton_identity_residuals, schouten, weyl
from .errors import SolitonLabError
from .expr import eval_jet, parse_expr
from .soliton import SolitonSpec, classify_branch, levelset_report, solve_profile
from .tensor import DenseTensor, contract
from .warped import Profile, WarpedModel, build_warped_chart, warped_ricci, warped_riemann, warped_scalar

__version__ = "0.1.0"
