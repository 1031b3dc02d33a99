"""Transport problem: two external nodes coupled through separate wall gaps.

With gaps on opposite walls a signal needs an even number of reflections to
cross; with both gaps on the same wall it needs an odd number. Masses are
integrals of the pair-connection surrogate over the reachable region beyond
the receiving gap, per reflection count of the admissible parity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .channel import ChannelModel, pair_connect_prob_exact
from .geometry2d import ReflectionRegion
from .mass2d import MassBreakdown
from .specfun import integrate_adaptive, lower_inc_gamma


@dataclass(frozen=True)
class TransportGeometry:
    """Two gaps and two external nodes.

    Case ``opposite``: transmitter gap [x_l1, x_l2] on the lower wall, node 0
    below it; receiver gap [x_u1, x_u2] on the upper wall, node 1 above it,
    offset to the left of node 0. Case ``same_side``: both gaps on the lower
    wall, receiver gap [x_l3, x_l4] to the right, node 1 below it.
    """

    w: float
    L: float
    case: str
    x_l1: float
    x_l2: float
    node0: Tuple[float, float]
    node1: Tuple[float, float]
    x_u1: Optional[float] = None
    x_u2: Optional[float] = None
    x_l3: Optional[float] = None
    x_l4: Optional[float] = None

    def __post_init__(self):
        if self.case not in ("opposite", "same_side"):
            raise ValueError("case must be 'opposite' or 'same_side'")
        if not (self.w > 0.0 and self.L > 0.0):
            raise ValueError("w and L must be positive")
        if not (self.x_l1 < self.x_l2):
            raise ValueError("transmitter gap is degenerate")
        x0, y0 = self.node0
        if y0 >= 0.0:
            raise ValueError("node 0 must sit below the lower wall")
        if not (self.x_l1 <= x0 <= self.x_l2):
            raise ValueError("node 0 must sit under its gap")
        x1, y1 = self.node1
        if self.case == "opposite":
            if self.x_u1 is None or self.x_u2 is None or not (self.x_u1 < self.x_u2):
                raise ValueError("receiver gap [x_u1, x_u2] is missing or degenerate")
            if y1 <= self.w:
                raise ValueError("node 1 must sit above the upper wall")
            if not (self.x_u1 <= x1 <= self.x_u2):
                raise ValueError("node 1 must sit over its gap")
        else:
            if self.x_l3 is None or self.x_l4 is None or not (self.x_l3 < self.x_l4):
                raise ValueError("receiver gap [x_l3, x_l4] is missing or degenerate")
            if not (self.x_l2 < self.x_l3):
                raise ValueError("same-side gaps must be disjoint, receiver to the right")
            if y1 >= 0.0:
                raise ValueError("node 1 must sit below the lower wall")

    @property
    def abs_y0(self) -> float:
        return -self.node0[1]

    @property
    def abs_y1(self) -> float:
        x1, y1 = self.node1
        return y1 - self.w if self.case == "opposite" else -y1

    def theta(self) -> float:
        """Maximum escape angle from the transmitter gap toward the receiver."""
        x0 = self.node0[0]
        if self.case == "opposite":
            return math.atan((x0 - self.x_l1) / self.abs_y0)
        return math.atan((self.x_l2 - x0) / self.abs_y0)

    def gaps_straddle(self) -> bool:
        """True when node 0 sits directly under the receiving gap (case 1)."""
        if self.case != "opposite":
            return False
        return self.x_u1 <= self.node0[0] <= self.x_u2


_EMPTY = ReflectionRegion(c=-1, phi_min=0.0, phi_max=0.0,
                          r_min=lambda phi: phi, r_max=lambda phi: phi, empty=True)


def _empty_region(c: int) -> ReflectionRegion:
    return ReflectionRegion(c=c, phi_min=0.0, phi_max=0.0,
                            r_min=_EMPTY.r_min, r_max=_EMPTY.r_max, empty=True)


def case1_bounds(tg: TransportGeometry, c: int) -> ReflectionRegion:
    """Region beyond the opposite-wall gap reachable after c reflections.

    Angles are measured from vertical, positive toward the receiver gap.
    Odd counts exit through the wrong wall and come back empty; when node 0
    sits directly under the receiving gap only direct rays survive.
    """
    if tg.case != "opposite":
        raise ValueError("case1_bounds applies to the opposite-gaps layout")
    if c < 0:
        raise ValueError("reflection count must be non-negative")
    if c % 2 == 1:
        return _empty_region(c)
    if tg.gaps_straddle() and c != 0:
        return _empty_region(c)

    x0 = tg.node0[0]
    ay0 = tg.abs_y0
    depth = (c + 1) * tg.w + ay0
    theta = tg.theta()
    phi_min = math.atan((x0 - tg.x_u2) / depth)
    phi_max = min(theta, math.atan((x0 - tg.x_u1) / depth))
    if tg.gaps_straddle():
        phi_min = max(phi_min, 0.0)
    if phi_max <= phi_min or phi_max <= 0.0:
        return _empty_region(c)

    span = x0 - tg.x_u1

    def r_min(phi):
        return depth / np.cos(phi)

    def r_max(phi):
        return span / np.sin(phi)

    return ReflectionRegion(c=c, phi_min=phi_min, phi_max=phi_max,
                            r_min=r_min, r_max=r_max)


def case1_min_reflections(tg: TransportGeometry, c_max: int) -> Optional[int]:
    """Smallest even reflection count with a non-empty receiving region."""
    for c in range(0, c_max + 1, 2):
        if not case1_bounds(tg, c).empty:
            return c
    return None


def case2_bounds(tg: TransportGeometry, c: int) -> ReflectionRegion:
    """Region beyond the same-wall receiving gap after c (odd) reflections."""
    if tg.case != "same_side":
        raise ValueError("case2_bounds applies to the same-side layout")
    if c < 0:
        raise ValueError("reflection count must be non-negative")
    if c % 2 == 0:
        return _empty_region(c)

    x0 = tg.node0[0]
    ay0 = tg.abs_y0
    depth = (c + 1) * tg.w + ay0
    theta = tg.theta()
    phi_min = math.atan((tg.x_l3 - x0) / depth)
    phi_max = min(theta, math.atan((tg.x_l4 - x0) / depth))
    if phi_max <= phi_min or phi_max <= 0.0:
        return _empty_region(c)

    span = tg.x_l4 - x0

    def r_min(phi):
        return depth / np.cos(phi)

    def r_max(phi):
        return span / np.sin(phi)

    return ReflectionRegion(c=c, phi_min=phi_min, phi_max=phi_max,
                            r_min=r_min, r_max=r_max)


@dataclass(frozen=True)
class Case2Path:
    c: int
    phi: float
    r: float
    feasible: bool


def case2_path(tg: TransportGeometry, c: int) -> Case2Path:
    """Point-to-point reflected path between the two nodes after c bounces.

    The angle and unfolded length follow from the image construction for any
    count; the path is feasible only for odd counts whose angle falls inside
    the admissible window.
    """
    if tg.case != "same_side":
        raise ValueError("case2_path applies to the same-side layout")
    if c < 0:
        raise ValueError("reflection count must be non-negative")
    x0, x1 = tg.node0[0], tg.node1[0]
    vert = (c + 1) * tg.w + tg.abs_y0 + tg.abs_y1
    phi = math.atan((x1 - x0) / vert)
    r = vert / math.cos(phi)
    if c % 2 == 0:
        return Case2Path(c=c, phi=phi, r=r, feasible=False)
    phi_low = math.atan((tg.x_l2 - x0) / (2.0 * tg.w + tg.abs_y0))
    return Case2Path(c=c, phi=phi, r=r,
                     feasible=phi_low <= phi <= tg.theta())


def _region_mass_quadrature(region: ReflectionRegion, model: ChannelModel,
                            tol: float = 1e-9) -> float:
    if region.empty:
        return 0.0
    lam = model.lambda_coeff(region.c)
    if math.isinf(lam):
        return 0.0
    p = model.radial_exponent()
    s = 2.0 / p
    pref = lam ** (-s) / p

    def integrand(phi):
        r_lo = float(region.r_min(phi))
        r_hi = float(region.r_max(phi))
        if r_lo >= r_hi:
            return 0.0
        return pref * (lower_inc_gamma(s, lam * r_hi ** p)
                       - lower_inc_gamma(s, lam * r_lo ** p))

    width = region.phi_max - region.phi_min
    coarse = abs(integrand(region.phi_min + 0.5 * width)) * width
    tol_abs = max(1e-16, tol * max(coarse, 1e-13))
    return integrate_adaptive(integrand, region.phi_min, region.phi_max, tol_abs)


def _region_mass_expansion(region: ReflectionRegion, model: ChannelModel,
                           span: float, depth: float,
                           leading_only: bool) -> float:
    """Quadratic expansion about the midpoint angle of the receiving window."""
    if region.empty:
        return 0.0
    lam = model.lambda_coeff(region.c)
    if math.isinf(lam):
        return 0.0
    mu = model.fit.mu
    s = 2.0 / mu
    pref = lam ** (-s) / mu

    phi_mid = 0.5 * (region.phi_min + region.phi_max)
    width = region.phi_max - region.phi_min
    csc = 1.0 / math.sin(phi_mid)
    sec = 1.0 / math.cos(phi_mid)
    r_far = span * csc
    r_near = depth * sec

    lead = width * (lower_inc_gamma(s, lam * r_far ** mu)
                    - lower_inc_gamma(s, lam * r_near ** mu))
    if leading_only:
        return pref * lead

    cot = 1.0 / math.tan(phi_mid)
    tanm = math.tan(phi_mid)
    a_t = math.exp(-lam * r_far ** mu) * mu * lam ** s * span ** 2 * csc ** 2
    b_t = csc ** 2 * (2.0 + math.cos(2.0 * phi_mid)
                      - mu * lam * math.cos(phi_mid) ** 2 * span ** mu * csc ** mu)
    d_t = math.exp(-lam * r_near ** mu) * mu * lam ** s * depth ** 2 * sec ** 2
    e_t = sec ** 2 * (-2.0 + math.cos(2.0 * phi_mid)
                      + mu * lam * depth ** mu * sec ** mu * math.sin(phi_mid) ** 2)

    # the linear term integrates to zero about the midpoint
    half = 0.5 * width
    quad = (a_t * b_t + d_t * e_t) / 6.0 * (half ** 3 - (-half) ** 3)
    return max(pref * (lead + quad), 0.0)


def transport_mass_case1(tg: TransportGeometry, model: ChannelModel,
                         method: str = "quadrature") -> MassBreakdown:
    """Mass of the receiving region for opposite gaps, over even counts.

    ``method`` selects the evaluation route: ``quadrature`` (authoritative),
    ``expansion`` (midpoint expansion through second order) or ``leading``
    (first term of the expansion only).
    """
    if method not in ("quadrature", "expansion", "leading"):
        raise ValueError(f"unknown method: {method!r}")
    per_c = []
    x0 = tg.node0[0]
    for c in range(0, model.C + 1, 2):
        region = case1_bounds(tg, c)
        if method == "quadrature":
            value = _region_mass_quadrature(region, model)
        else:
            value = _region_mass_expansion(
                region, model, span=x0 - tg.x_u1,
                depth=(c + 1) * tg.w + tg.abs_y0,
                leading_only=(method == "leading"))
        per_c.append((c, value))
    tag = "quadrature" if method == "quadrature" else "closed_form"
    return MassBreakdown.from_contributions(per_c, tag, "directed")


def transport_mass_case2(tg: TransportGeometry, model: ChannelModel,
                         method: str = "quadrature") -> MassBreakdown:
    """Mass of the receiving region for same-side gaps, over odd counts."""
    if method not in ("quadrature", "expansion", "leading"):
        raise ValueError(f"unknown method: {method!r}")
    per_c = []
    x0 = tg.node0[0]
    for c in range(1, model.C + 1, 2):
        region = case2_bounds(tg, c)
        if method == "quadrature":
            value = _region_mass_quadrature(region, model)
        else:
            value = _region_mass_expansion(
                region, model, span=tg.x_l4 - x0,
                depth=(c + 1) * tg.w + tg.abs_y0,
                leading_only=(method == "leading"))
        per_c.append((c, value))
    tag = "quadrature" if method == "quadrature" else "closed_form"
    return MassBreakdown.from_contributions(per_c, tag, "directed")


def transport_min_path(tg: TransportGeometry, p0, p1, c_max: int) -> Optional[Tuple[int, float]]:
    """Minimal reflection count and unfolded distance for a node pair.

    Both gap crossings of the unfolded straight segment must fall inside
    their gaps. Returns None when no count of the admissible parity up to
    ``c_max`` works.
    """
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    ay0 = -y0
    if tg.case == "opposite":
        start, step = 0, 2
        beyond = y1 - tg.w
        rx_lo, rx_hi = tg.x_u1, tg.x_u2
    else:
        start, step = 1, 2
        beyond = -y1
        rx_lo, rx_hi = tg.x_l3, tg.x_l4
    dx = x1 - x0
    for c in range(start, c_max + 1, step):
        exit_h = (c + 1) * tg.w
        vert = exit_h + ay0 + beyond
        # crossing of the transmitter gap at the lower wall
        x_at0 = x0 + dx * (ay0 / vert)
        if not (tg.x_l1 <= x_at0 <= tg.x_l2):
            continue
        # crossing of the receiver gap at its unfolded height
        x_at1 = x0 + dx * ((exit_h + ay0) / vert)
        if not (rx_lo <= x_at1 <= rx_hi):
            continue
        return c, math.hypot(dx, vert)
    return None


def averaged_connect_prob(tg: TransportGeometry, model: ChannelModel,
                          region0: Tuple[float, float, float, float],
                          region1: Tuple[float, float, float, float],
                          n_outer: int = 12, n_inner: int = 24,
                          link_prob: Optional[Callable] = None) -> float:
    """Pair connection probability averaged over both node regions.

    Regions are axis-aligned boxes (x_lo, x_hi, y_lo, y_hi). The average is
    a Gauss-Legendre double quadrature of the minimal-path link probability;
    by default the exact Marcum form at the minimal feasible count.
    """
    for name, box in (("region0", region0), ("region1", region1)):
        if not (box[1] > box[0] and box[3] > box[2]):
            raise ValueError(f"{name} must have positive area")

    if link_prob is None:
        def link_prob(r, c):
            return pair_connect_prob_exact(r, c, model)

    x0n, w0 = np.polynomial.legendre.leggauss(n_outer)
    x1n, w1 = np.polynomial.legendre.leggauss(n_inner)

    def scaled(nodes, lo, hi):
        return 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo), 0.5 * (hi - lo)

    gx0, jx0 = scaled(x0n, region0[0], region0[1])
    gy0, jy0 = scaled(x0n, region0[2], region0[3])
    gx1, jx1 = scaled(x1n, region1[0], region1[1])
    gy1, jy1 = scaled(x1n, region1[2], region1[3])

    total = 0.0
    for ix, px in enumerate(gx0):
        for iy, py in enumerate(gy0):
            inner = 0.0
            for jx, qx in enumerate(gx1):
                for jy, qy in enumerate(gy1):
                    path = transport_min_path(tg, (px, py), (qx, qy), model.C)
                    if path is None:
                        continue
                    c, r = path
                    inner += w1[jx] * w1[jy] * float(link_prob(r, c))
            total += w0[ix] * w0[iy] * inner
    total *= jx0 * jy0 * jx1 * jy1
    v0 = (region0[1] - region0[0]) * (region0[3] - region0[2])
    v1 = (region1[1] - region1[0]) * (region1[3] - region1[2])
    return total / (v0 * v1)
