"""Three-dimensional escape problem: a slab with a circular gap in the floor.

The slab is [0, L] x [0, L] x [0, w] with the external node below the floor
at z0 < 0. For a node on the gap axis the escape cone has half-angle
theta = atan(gap_radius / |z0|), and the reflection regions take the same
form as in the plane with |z0| in place of |y0|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .channel import ChannelModel
from .geometry2d import ReflectionRegion
from .mass2d import MassBreakdown
from .specfun import integrate_adaptive, lower_inc_gamma


@dataclass(frozen=True)
class Geometry3D:
    w: float
    L: float
    gap_radius: float
    gap_center: Tuple[float, float]
    x0: float
    y0: float
    z0: float

    def __post_init__(self):
        if not (self.w > 0.0 and self.L > 0.0):
            raise ValueError("w and L must be positive")
        if not (0.0 < self.gap_radius < self.w):
            raise ValueError("gap radius must satisfy 0 < radius < w")
        if self.z0 >= 0.0:
            raise ValueError("the external node must sit below the floor (z0 < 0)")
        gx, gy = self.gap_center
        r = self.gap_radius
        if not (r <= gx <= self.L - r and r <= gy <= self.L - r):
            raise ValueError("gap disc must lie on the floor within [0, L]^2")
        if self.node_offset() > self.gap_radius + 1e-12:
            raise ValueError("node 0 must sit over the gap disc")

    @property
    def abs_z0(self) -> float:
        return -self.z0

    def node_offset(self) -> float:
        gx, gy = self.gap_center
        return math.hypot(self.x0 - gx, self.y0 - gy)

    def is_on_axis(self, tol: float = 1e-9) -> bool:
        return self.node_offset() <= tol

    def theta(self, varphi: float = 0.0) -> float:
        """Escape-cone half-angle along azimuth ``varphi``.

        Constant for a node on the gap axis; otherwise set by the distance
        to the gap rim along that azimuth.
        """
        gx, gy = self.gap_center
        ux = self.x0 - gx
        uy = self.y0 - gy
        ue = ux * math.cos(varphi) + uy * math.sin(varphi)
        d2 = ux * ux + uy * uy
        reach = -ue + math.sqrt(self.gap_radius ** 2 - d2 + ue * ue)
        return math.atan(reach / self.abs_z0)


def region_bounds_3d(g: Geometry3D, c: int, varphi: float = 0.0) -> ReflectionRegion:
    """Inclination and radial bounds of the 3-D region D_c at one azimuth."""
    if c < 0:
        raise ValueError("reflection count must be non-negative")
    th = g.theta(varphi)
    az0 = g.abs_z0
    w = g.w

    if c == 0:
        phi_min = 0.0

        def r_min(phi):
            return az0 / np.cos(phi)
    else:
        phi_min = math.atan(((c - 1) * w + az0) * math.tan(th) / ((c + 1) * w + az0))
        sin_th = math.sin(th)

        def r_min(phi):
            return 2.0 * (c * w + az0) * sin_th / np.sin(th + phi)

    def r_max(phi):
        return ((c + 1) * w + az0) / np.cos(phi)

    return ReflectionRegion(c=c, phi_min=phi_min, phi_max=th, r_min=r_min, r_max=r_max)


def _shell_mass(lam: float, p: float, r_lo: float, r_hi: float) -> float:
    """Exact r-integral of r^2 exp(-lam r^p) over [r_lo, r_hi]."""
    s = 3.0 / p
    scale = lam ** (-s) / p
    return scale * (lower_inc_gamma(s, lam * r_hi ** p)
                    - lower_inc_gamma(s, lam * r_lo ** p))


def _per_c_quadrature_3d(theta: float, w: float, az0: float,
                         model: ChannelModel, c: int, tol: float) -> float:
    lam = model.lambda_coeff(c)
    if math.isinf(lam):
        return 0.0
    p = model.radial_exponent()
    if c == 0:
        phi_min = 0.0

        def integrand(phi):
            r_lo = az0 / math.cos(phi)
            r_hi = (w + az0) / math.cos(phi)
            return _shell_mass(lam, p, r_lo, r_hi) * math.sin(phi)
    else:
        phi_min = math.atan(((c - 1) * w + az0) * math.tan(theta) / ((c + 1) * w + az0))
        sin_th = math.sin(theta)

        def integrand(phi):
            r_lo = 2.0 * (c * w + az0) * sin_th / math.sin(theta + phi)
            r_hi = ((c + 1) * w + az0) / math.cos(phi)
            if r_lo >= r_hi:
                return 0.0
            return _shell_mass(lam, p, r_lo, r_hi) * math.sin(phi)

    coarse = abs(integrand(0.5 * (phi_min + theta))) * max(theta - phi_min, 1e-30)
    tol_abs = max(1e-16, tol * max(coarse, 1e-13))
    return integrate_adaptive(integrand, phi_min, theta, tol_abs)


def mass3d_numeric(g: Geometry3D, model: ChannelModel, tol: float = 1e-9,
                   azimuthal: bool = False) -> MassBreakdown:
    """3-D connectivity mass by quadrature over inclination (and azimuth).

    For an on-axis node the azimuthal integral is the factor 2*pi unless
    ``azimuthal`` forces the full nested evaluation (used to verify the
    axisymmetric shortcut).
    """
    per_c = []
    for c in range(model.C + 1):
        if g.is_on_axis() and not azimuthal:
            value = 2.0 * math.pi * _per_c_quadrature_3d(
                g.theta(), g.w, g.abs_z0, model, c, tol)
        else:
            def outer(varphi, c=c):
                return _per_c_quadrature_3d(g.theta(varphi), g.w, g.abs_z0,
                                            model, c, tol * 10.0)
            coarse = abs(outer(0.0)) * 2.0 * math.pi
            value = integrate_adaptive(outer, 0.0, 2.0 * math.pi,
                                       max(tol * max(coarse, 1e-12), 1e-15))
        per_c.append((c, value))
    return MassBreakdown.from_contributions(per_c, "quadrature", "full")


def _per_c_closed_form_3d(theta: float, w: float, az0: float,
                          model: ChannelModel, c: int) -> float:
    lam = model.lambda_coeff(c)
    if math.isinf(lam):
        return 0.0
    mu = model.fit.mu
    s = 3.0 / mu
    pref = lam ** (-s) / mu

    if c == 0:
        r_lo = az0
        r_hi = w + az0
        lead = (1.0 - math.cos(theta)) * (lower_inc_gamma(s, lam * r_hi ** mu)
                                          - lower_inc_gamma(s, lam * r_lo ** mu))
        # integral of phi^2 sin(phi) over [0, theta]
        i2 = (2.0 - theta ** 2) * math.cos(theta) + 2.0 * theta * math.sin(theta) - 2.0
        quad = i2 * 0.5 * mu * lam ** s * (
            r_hi ** 3 * math.exp(-lam * r_hi ** mu)
            - r_lo ** 3 * math.exp(-lam * r_lo ** mu))
        return max(pref * (lead + quad), 0.0)

    phi_min = math.atan(((c - 1) * w + az0) * math.tan(theta) / ((c + 1) * w + az0))
    r_hi = (c + 1) * w + az0
    u = 1.5 * theta
    r0 = 2.0 * (c * w + az0) * math.sin(theta) / math.sin(u)

    lead = (math.cos(phi_min) - math.cos(theta)) * (
        lower_inc_gamma(s, lam * r_hi ** mu) - lower_inc_gamma(s, lam * r0 ** mu))

    a_coef = mu * lam ** s * r0 ** 3 * math.exp(-lam * r0 ** mu)
    cot_u = 1.0 / math.tan(u)
    csc2_u = 1.0 / math.sin(u) ** 2
    b_coef = 0.5 * (cot_u ** 2 * (mu * lam * r0 ** mu - 4.0) - 1.0)

    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(phi_min), math.sin(phi_min)
    # angular moments against sin(phi) over [phi_min, theta]
    c3 = (2.0 - theta ** 2) * ct + (phi_min ** 2 - 2.0) * cp \
        + 2.0 * theta * st - 2.0 * phi_min * sp
    d3 = st - 0.5 * theta * ct - sp + (phi_min - 0.5 * theta) * cp
    e3 = (2.0 - 0.25 * theta ** 2) * ct + theta * st \
        + ((phi_min - 0.5 * theta) ** 2 - 2.0) * cp + (theta - 2.0 * phi_min) * sp

    quad_outer = 0.5 * mu * lam ** s * r_hi ** 3 * math.exp(-lam * r_hi ** mu) * c3
    linear_inner = cot_u * a_coef * d3
    quad_inner = a_coef * b_coef * e3
    return max(pref * (lead + quad_outer + linear_inner + quad_inner), 0.0)


def mass3d_closed_form(g: Geometry3D, model: ChannelModel) -> MassBreakdown:
    """Small-angle closed form of the 3-D connectivity mass (on-axis node)."""
    if model.eta != 2.0:
        raise ValueError("the closed form is derived for eta = 2")
    if not g.is_on_axis():
        raise ValueError("the closed form assumes a node on the gap axis")
    theta = g.theta()
    per_c = []
    for c in range(model.C + 1):
        value = 2.0 * math.pi * _per_c_closed_form_3d(theta, g.w, g.abs_z0, model, c)
        per_c.append((c, value))
    return MassBreakdown.from_contributions(per_c, "closed_form", "full")


def volume_ratio_first_reflection(g: Geometry3D) -> float:
    """Coverage gained by the first reflection relative to the direct cone.

    Closed form 1 + 6(1 + |z0|/w) / (1 + 3|z0|/w + 3(|z0|/w)^2); tends to 7
    as the node approaches the floor (additive term tends to 6) and to 1 as
    it recedes.
    """
    u = g.abs_z0 / g.w
    return 1.0 + 6.0 * (1.0 + u) / (1.0 + 3.0 * u + 3.0 * u * u)
