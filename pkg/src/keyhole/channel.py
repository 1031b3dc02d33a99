"""Pair-connection probability under Rician fading with reflection losses.

A link over unfolded distance r whose signal bounced c times off the walls
connects with probability H = Q1(sqrt(2K), sqrt(2(K+1) beta r^eta alpha^-c)).
The approximate form replaces Q1 with the fitted surrogate, giving
H ~ exp(-lambda_c * r^(mu*eta/2)) with lambda_c = e^nu (2(K+1) beta alpha^-c)^(mu/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .specfun import ApproxFit, fit_exponential_approx, marcum_q1


@dataclass(frozen=True)
class ChannelModel:
    K: float
    beta: float
    eta: float = 2.0
    alpha: float = 1.0
    C: int = 6
    fit: Optional[ApproxFit] = None

    def __post_init__(self):
        if not (self.beta > 0.0) or not math.isfinite(self.beta):
            raise ValueError("beta must be positive and finite")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.eta < 2.0:
            raise ValueError("path-loss exponent eta must be >= 2")
        if self.C < 0:
            raise ValueError("C must be non-negative")
        if self.K < 0.0 or not math.isfinite(self.K):
            raise ValueError("K must be finite and non-negative")

    @property
    def a_parameter(self) -> float:
        return math.sqrt(2.0 * self.K)

    def b_coefficient(self, c: int) -> float:
        """sqrt(2(K+1) beta alpha^-c); the Marcum argument is b = coeff * r^(eta/2)."""
        self._check_c(c)
        if self.alpha == 0.0 and c > 0:
            return math.inf
        return math.sqrt(2.0 * (self.K + 1.0) * self.beta * self.alpha ** (-c))

    def lambda_coeff(self, c: int) -> float:
        """Decay coefficient of the surrogate form exp(-lambda_c r^(mu*eta/2))."""
        self._require_fit()
        self._check_c(c)
        if self.alpha == 0.0 and c > 0:
            return math.inf
        base = 2.0 * (self.K + 1.0) * self.beta * self.alpha ** (-c)
        return math.exp(self.fit.nu) * base ** (0.5 * self.fit.mu)

    def radial_exponent(self) -> float:
        """Exponent of r in the surrogate link probability."""
        self._require_fit()
        return 0.5 * self.fit.mu * self.eta

    def _check_c(self, c: int) -> None:
        if c < 0 or c > self.C:
            raise ValueError(f"reflection count {c} outside [0, {self.C}]")

    def _require_fit(self) -> None:
        if self.fit is None:
            raise ValueError("ChannelModel.fit is not populated")


def make_channel_model(K: float, beta: float, eta: float = 2.0,
                       alpha: float = 1.0, C: int = 6) -> ChannelModel:
    """Build a ChannelModel and populate its surrogate fit for this K."""
    return ChannelModel(K=K, beta=beta, eta=eta, alpha=alpha, C=C,
                        fit=fit_exponential_approx(K, "free"))


def pair_connect_prob_exact(r, c: int, model: ChannelModel):
    """Connection probability from the Marcum Q form; r > 0 required."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0):
        raise ValueError("distance r must be positive")
    coeff = model.b_coefficient(c)
    if math.isinf(coeff):
        return 0.0 if np.ndim(r) == 0 else np.zeros_like(r_arr)
    b = coeff * r_arr ** (0.5 * model.eta)
    return marcum_q1(model.a_parameter, b)


def pair_connect_prob_approx(r, c: int, model: ChannelModel):
    """Connection probability from the exponential surrogate."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0):
        raise ValueError("distance r must be positive")
    lam = model.lambda_coeff(c)
    if math.isinf(lam):
        return 0.0 if np.ndim(r) == 0 else np.zeros_like(r_arr)
    out = np.exp(-lam * r_arr ** model.radial_exponent())
    if np.ndim(r) == 0:
        return float(out)
    return out
