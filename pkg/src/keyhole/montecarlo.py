"""Stochastic oracle: random node placement, link sampling and connectivity
event estimation for the escape and transport layouts.

Links are Bernoulli draws with the exact Marcum-Q connection probability
(tabulated densely enough that interpolation error is far below Monte Carlo
noise; the exponential surrogate is never used here). Draws are counter
based, so estimates are reproducible bit for bit regardless of backend or
execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .channel import ChannelModel
from .geometry2d import Geometry2D
from .escape3d import Geometry3D
from .specfun import marcum_q1
from .transport import TransportGeometry, transport_min_path

LINK_TABLE_POINTS = 1 << 17


@dataclass(frozen=True)
class McEstimate:
    event_count: int
    trials: int
    p_hat: float
    std_err: float
    seed: int

    @staticmethod
    def from_counts(event_count: int, trials: int, seed: int) -> "McEstimate":
        p = event_count / trials
        return McEstimate(event_count=event_count, trials=trials, p_hat=p,
                          std_err=math.sqrt(p * (1.0 - p) / trials), seed=seed)


@dataclass
class McConfig:
    scenario: str                      # "escape2d" | "escape3d" | "transport"
    geometry: object
    channel: ChannelModel
    trials: int
    seed: int
    rho: Optional[float] = None
    n: Optional[int] = None
    event: str = "joint"               # "joint" | "isolated_only"
    c_max: Optional[int] = None
    region0: Optional[Tuple[float, float, float, float]] = None
    region1: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.scenario not in ("escape2d", "escape3d", "transport"):
            raise ValueError(f"unknown scenario: {self.scenario!r}")
        if self.event not in ("joint", "isolated_only"):
            raise ValueError(f"unknown event: {self.event!r}")
        if self.scenario != "transport":
            if (self.rho is None) == (self.n is None):
                raise ValueError("give exactly one of rho and n")

    def node_count(self) -> int:
        if self.n is not None:
            return self.n
        return int(round(self.rho * self.domain_measure()))

    def domain_measure(self) -> float:
        g = self.geometry
        if self.scenario == "escape2d":
            return g.w * g.L
        if self.scenario == "escape3d":
            return g.w * g.L * g.L
        raise ValueError("transport runs have no single domain measure")


def link_probability_table(model: ChannelModel,
                           points: int = LINK_TABLE_POINTS) -> Tuple[np.ndarray, float]:
    """Dense tabulation of Q1(a, b) against b for kernel-side interpolation."""
    b_hi = model.a_parameter + 14.0
    tab = np.asarray(marcum_q1(model.a_parameter, np.linspace(0.0, b_hi, points)))
    inv_step = (points - 1) / b_hi
    return tab, inv_step


def _b_coefficients(model: ChannelModel, c_max: int) -> np.ndarray:
    out = np.empty(c_max + 1)
    for c in range(c_max + 1):
        coeff = model.b_coefficient(c) if c <= model.C else math.inf
        out[c] = coeff
    return out


def _escape_counts(cfg: McConfig, need_interior: bool,
                   force_backend: Optional[str] = None) -> Tuple[int, int, int]:
    model = cfg.channel
    if model.eta != 2.0:
        raise NotImplementedError("trial kernels assume eta = 2")
    g = cfg.geometry
    c_max = cfg.c_max if cfg.c_max is not None else model.C
    c_max = min(c_max, model.C)
    n = cfg.node_count()
    tab, inv_step = link_probability_table(model)
    b_coeffs = _b_coefficients(model, c_max)
    if cfg.scenario == "escape2d":
        dims = (g.L, g.w)
        node0 = (g.x0, g.y0)
        tans = (math.tan(g.theta()), math.tan(g.theta_right()))
    else:
        if not g.is_on_axis():
            raise NotImplementedError("3-D trials assume a node on the gap axis")
        dims = (g.L, g.w)
        node0 = (g.x0, g.y0, g.z0)
        t = math.tan(g.theta())
        tans = (t, t)
    # infinite coefficients (alpha = 0) map far beyond the table, giving H = 0
    b_coeffs = np.where(np.isinf(b_coeffs), 1e9, b_coeffs)
    return _kernels.escape_trials(cfg.seed, cfg.trials, n, dims, node0, tans,
                                  b_coeffs, tab, inv_step, need_interior,
                                  force_backend=force_backend)


def run_escape_isolation(cfg: McConfig, force_backend: Optional[str] = None) -> McEstimate:
    """Estimate the external-node isolation event.

    ``event="joint"`` counts trials where node 0 reaches nobody while the
    interior graph is fully connected; ``event="isolated_only"`` drops the
    interior condition (the two coincide in dense regimes).
    """
    need_interior = cfg.event == "joint"
    iso, joint, _ = _escape_counts(cfg, need_interior, force_backend)
    count = joint if cfg.event == "joint" else iso
    return McEstimate.from_counts(count, cfg.trials, cfg.seed)


def run_full_connectivity(cfg: McConfig, force_backend: Optional[str] = None) -> McEstimate:
    """Estimate the probability that all nodes form a single component."""
    _, _, full = _escape_counts(cfg, True, force_backend)
    return McEstimate.from_counts(full, cfg.trials, cfg.seed)


@dataclass(frozen=True)
class TransportEstimate:
    estimate: McEstimate
    per_c_attempts: Tuple[int, ...]
    per_c_connects: Tuple[int, ...]


def run_transport(cfg: McConfig) -> TransportEstimate:
    """Estimate the pair connection probability for the transport layout.

    Node positions are drawn uniformly from ``region0``/``region1`` boxes
    (degenerate boxes pin a node). The link fires with the exact Marcum
    probability of the minimal feasible path. Trials are also stratified by
    that minimal reflection count.
    """
    tg: TransportGeometry = cfg.geometry
    model = cfg.channel
    c_max = cfg.c_max if cfg.c_max is not None else model.C

    region0 = cfg.region0 or (tg.node0[0], tg.node0[0], tg.node0[1], tg.node0[1])
    region1 = cfg.region1 or (tg.node1[0], tg.node1[0], tg.node1[1], tg.node1[1])

    trials = np.arange(cfg.trials, dtype=np.uint64)
    base = _kernels.trial_bases_np(cfg.seed, trials)

    def sample_box(stream, box):
        xs = _kernels.draws_np(base, stream, np.zeros(cfg.trials, dtype=np.uint64))
        ys = _kernels.draws_np(base, stream, np.ones(cfg.trials, dtype=np.uint64))
        x = box[0] + (box[1] - box[0]) * xs
        y = box[2] + (box[3] - box[2]) * ys
        return x, y

    x0s, y0s = sample_box(_kernels.STREAM_POSITION, region0)
    x1s, y1s = sample_box(_kernels.STREAM_NODE1, region1)

    parity_start = 0 if tg.case == "opposite" else 1
    c_vals = np.full(cfg.trials, -1, dtype=np.int64)
    r_vals = np.zeros(cfg.trials)
    ay0 = -y0s
    beyond = (y1s - tg.w) if tg.case == "opposite" else -y1s
    if tg.case == "opposite":
        rx_lo, rx_hi = tg.x_u1, tg.x_u2
    else:
        rx_lo, rx_hi = tg.x_l3, tg.x_l4
    dx = x1s - x0s
    todo = np.ones(cfg.trials, dtype=bool)
    for c in range(parity_start, c_max + 1, 2):
        exit_h = (c + 1) * tg.w
        vert = exit_h + ay0 + beyond
        x_at0 = x0s + dx * (ay0 / vert)
        x_at1 = x0s + dx * ((exit_h + ay0) / vert)
        ok = (todo & (x_at0 >= tg.x_l1) & (x_at0 <= tg.x_l2)
              & (x_at1 >= rx_lo) & (x_at1 <= rx_hi))
        c_vals[ok] = c
        r_vals[ok] = np.hypot(dx[ok], vert[ok])
        todo &= ~ok

    feasible = c_vals >= 0
    h = np.zeros(cfg.trials)
    for c in range(parity_start, c_max + 1, 2):
        sel = feasible & (c_vals == c)
        if sel.any():
            b = model.b_coefficient(c)
            if math.isinf(b):
                continue
            h[sel] = marcum_q1(model.a_parameter, b * r_vals[sel])
    u = _kernels.draws_np(base, _kernels.STREAM_LINK,
                          np.zeros(cfg.trials, dtype=np.uint64))
    connected = u < h

    attempts = []
    connects = []
    for c in range(0, c_max + 1):
        sel = c_vals == c
        attempts.append(int(sel.sum()))
        connects.append(int((sel & connected).sum()))
    est = McEstimate.from_counts(int(connected.sum()), cfg.trials, cfg.seed)
    return TransportEstimate(estimate=est, per_c_attempts=tuple(attempts),
                             per_c_connects=tuple(connects))


@dataclass(frozen=True)
class RayPath:
    points: Tuple[Tuple[float, ...], ...]
    reflections: int
    length: float
    stopped: str        # "budget" | "escaped" | "blocked" | "free"

    @property
    def truncated(self) -> bool:
        return self.stopped in ("budget", "blocked", "free")

    def point_at(self, distance: float) -> Tuple[float, ...]:
        """Point at the given arc length along the polyline."""
        remaining = distance
        pts = [np.asarray(p) for p in self.points]
        for a, b in zip(pts, pts[1:]):
            seg = float(np.linalg.norm(b - a))
            if remaining <= seg or seg == 0.0:
                if seg == 0.0:
                    continue
                return tuple(a + (remaining / seg) * (b - a))
            remaining -= seg
        raise ValueError("distance exceeds traced path length")


def trace_ray(geometry, origin: Sequence[float], direction: Sequence[float],
              max_reflections: int) -> RayPath:
    """Trace a ray with specular bounces off the horizontal walls.

    The wall holding the gap is transparent over the gap span (disc in 3-D).
    Tracing stops when the reflection budget would be exceeded (``budget``),
    the ray escapes downward through the gap (``escaped``), it hits the
    gapped wall outside the gap from below (``blocked``), or it never meets
    a wall (``free``).
    """
    origin = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    d = d / norm

    if isinstance(geometry, Geometry2D):
        axis = 1

        def in_gap(p):
            return geometry.gap_left <= p[0] <= geometry.gap_right
    elif isinstance(geometry, Geometry3D):
        axis = 2

        def in_gap(p):
            gx, gy = geometry.gap_center
            return math.hypot(p[0] - gx, p[1] - gy) <= geometry.gap_radius
    else:
        raise TypeError("trace_ray needs a Geometry2D or Geometry3D")

    w = geometry.w
    pos = origin.copy()
    points = [tuple(pos)]
    reflections = 0
    length = 0.0
    for _ in range(max_reflections + 8):
        dv = d[axis]
        if dv == 0.0:
            return RayPath(tuple(points), reflections, length, "free")
        if dv > 0.0:
            plane = 0.0 if pos[axis] < -1e-15 else w
        else:
            plane = w if pos[axis] > w + 1e-15 else 0.0
        t = (plane - pos[axis]) / dv
        if t <= 0.0:
            return RayPath(tuple(points), reflections, length, "free")
        hit = pos + t * d
        length += float(t)
        points.append(tuple(hit))
        pos = hit
        if plane == 0.0:
            if in_gap(hit):
                if dv > 0.0:
                    continue                 # entering through the gap
                return RayPath(tuple(points), reflections, length, "escaped")
            if dv > 0.0:
                # hit the gapped wall from below, outside the gap
                return RayPath(tuple(points), reflections, length, "blocked")
        if reflections >= max_reflections:
            return RayPath(tuple(points), reflections, length, "budget")
        d = d.copy()
        d[axis] = -d[axis]
        reflections += 1
    return RayPath(tuple(points), reflections, length, "budget")
