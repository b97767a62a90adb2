"""Michaelis-Menten rate laws of the nondimensional tumour model.

The model works with three dimensionless rate functions of the nutrient
concentration ``C``::

    a(C) = C/(c_c + C) - (B/A) (1 - sigma C/(c_d + C))            net growth
    b(C) = C/(c_c + C) - (1 - delta)(B/A) (1 - sigma C/(c_d + C))  volume source
    k(C) = beta_hat_a C/(c_c + C)                                  consumption

``p = (c_c, c_d, sigma)`` is the inversion vector; ``B/A``, ``delta`` and
``beta_hat_a`` are fixed model constants.  Every function accepts scalar or
array ``C`` and broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Parameters",
    "ModelConstants",
    "RateValues",
    "rate_a",
    "rate_b",
    "rate_k",
    "rates",
    "rates_dC",
    "rates_dp",
    "PARAM_NAMES",
]

PARAM_NAMES = ("c_c", "c_d", "sigma")


@dataclass(frozen=True)
class Parameters:
    """Kinetic parameters recovered by the inversion."""

    c_c: float
    c_d: float
    sigma: float

    def __post_init__(self):
        vals = (self.c_c, self.c_d, self.sigma)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite parameters {vals}")
        if self.c_c <= 0 or self.c_d <= 0:
            raise ValueError(f"half-saturation constants must be positive, got {vals}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.c_c, self.c_d, self.sigma], dtype=float)

    @classmethod
    def from_array(cls, x) -> "Parameters":
        x = np.asarray(x, dtype=float)
        if x.shape != (3,):
            raise ValueError(f"expected 3 parameters, got shape {x.shape}")
        return cls(float(x[0]), float(x[1]), float(x[2]))


@dataclass(frozen=True)
class ModelConstants:
    """Fixed dimensionless groups of the model.

    The defaults are reference-derived values for this package, not measured
    quantities; change them through the run configuration.
    """

    b_over_a: float = 0.5
    delta: float = 0.5
    beta_hat_a: float = 0.005

    def __post_init__(self):
        if not self.b_over_a > 0:
            raise ValueError(f"b_over_a must be positive, got {self.b_over_a}")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.beta_hat_a > 0:
            raise ValueError(f"beta_hat_a must be positive, got {self.beta_hat_a}")


@dataclass(frozen=True)
class RateValues:
    a: np.ndarray | float
    b: np.ndarray | float
    k: np.ndarray | float


def _check_conc(C):
    C = np.asarray(C, dtype=float)
    if np.any(C < 0):
        raise ValueError(f"concentration must be non-negative (min {C.min():g})")
    return C


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _death_factor(C, p):
    # 1 - sigma C/(c_d + C), proportional to k_d
    return 1.0 - p.sigma * C / (p.c_d + C)


def rate_a(C, p: Parameters, mc: ModelConstants):
    C = _check_conc(C)
    return _out(C / (p.c_c + C) - mc.b_over_a * _death_factor(C, p))


def rate_b(C, p: Parameters, mc: ModelConstants):
    C = _check_conc(C)
    return _out(C / (p.c_c + C) - (1.0 - mc.delta) * mc.b_over_a * _death_factor(C, p))


def rate_k(C, p: Parameters, mc: ModelConstants):
    C = _check_conc(C)
    return _out(mc.beta_hat_a * C / (p.c_c + C))


def rates(C, p: Parameters, mc: ModelConstants) -> RateValues:
    """Evaluate ``a``, ``b`` and ``k`` together."""
    C = _check_conc(C)
    km = C / (p.c_c + C)
    kd = mc.b_over_a * _death_factor(C, p)
    return RateValues(
        a=_out(km - kd),
        b=_out(km - (1.0 - mc.delta) * kd),
        k=_out(mc.beta_hat_a * km),
    )


def rates_dC(C, p: Parameters, mc: ModelConstants):
    """Partial derivatives ``(da/dC, db/dC, dk/dC)``."""
    C = _check_conc(C)
    dkm = p.c_c / (p.c_c + C) ** 2
    dkd = mc.b_over_a * p.sigma * p.c_d / (p.c_d + C) ** 2  # minus d(kd)/dC
    return (
        _out(dkm + dkd),
        _out(dkm + (1.0 - mc.delta) * dkd),
        _out(mc.beta_hat_a * dkm),
    )


def rates_dp(C, p: Parameters, mc: ModelConstants) -> np.ndarray:
    """Jacobian of ``(a, b, k)`` with respect to ``(c_c, c_d, sigma)``.

    Returns an array of shape ``(3, 3) + C.shape``; row ``i`` is the rate
    (a, b, k) and column ``j`` the parameter.  Only the three kinetic
    parameters are differentiated; ``A`` and ``B`` stay fixed.
    """
    C = _check_conc(C)
    dkm_dcc = -C / (p.c_c + C) ** 2
    zero = np.zeros_like(C)
    # derivatives of the death factor (1 - sigma C/(c_d + C)) scaled by B/A
    dkd_dcd = mc.b_over_a * p.sigma * C / (p.c_d + C) ** 2
    dkd_dsig = -mc.b_over_a * C / (p.c_d + C)
    one_m_delta = 1.0 - mc.delta
    return np.array(
        [
            [dkm_dcc, -dkd_dcd, -dkd_dsig],
            [dkm_dcc, -one_m_delta * dkd_dcd, -one_m_delta * dkd_dsig],
            [mc.beta_hat_a * dkm_dcc, zero, zero],
        ]
    )
