"""Curvature sign conventions, fixed once and pinned by calibration tests.

The curvature operator is the negative of the usual one::

    R(X, Y)Z = -nabla_X nabla_Y Z + nabla_Y nabla_X Z + nabla_[X,Y] Z

with ``R_ijkl = g(R(d_i, d_j) d_k, d_l)`` and ``Ric_ij = R_ipjp``. For a space
of constant sectional curvature K this gives
``R_ijkl = K (g_ik g_jl - g_il g_jk)``, so ``R_ijij > 0`` on the round sphere,
``Ric = (n-1) K g`` and scalar curvature ``n (n-1) K``.
"""

# multiplies g_lm * (d_i G^m_jk - d_j G^m_ik + G^m_ia G^a_jk - G^m_ja G^a_ik)
CURVATURE_OPERATOR_SIGN = -1.0

# Space-form curvature tensor: R_abcd = CURVATURE_FORM_SIGN * c (g_ac g_bd - g_ad g_bc)
CURVATURE_FORM_SIGN = 1.0

# Warped products dr^2 + f(r)^2 gbar: the fiber block of the curvature is
#   R_abcd = f^2 Rbar_abcd + WARPED_FIBER_TERM_SIGN * (f f')^2 (gbar_ad gbar_bc - gbar_ac gbar_bd)
# f = sin r over the unit 2-sphere must reproduce sectional curvature +1.
WARPED_FIBER_TERM_SIGN = 1.0

# Near-zero guard for the warping function: closed forms divide by f = F'.
WARP_EPS = 1e-8

# Guard band excluded from polar-type charts at coordinate singularities.
POLE_GUARD = 1e-2
