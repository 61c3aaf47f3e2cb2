"""
Spin-echo decay models and the frozen-solution spectral-diffusion regime analysis
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from config import REGIME_CONFIG
from exceptions import DomainError, InputError
from physconst import CONSTANTS, NuclearSpecies

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


class DecayKind(Enum):
    MONO = "mono"
    STRETCHED = "stretched"
    MODULATED_BI = "modulated_bi"


class Regime(Enum):
    RIGID = "rigid"
    SLOW_DIFFUSION = "slow_diffusion"
    FAST_DIFFUSION = "fast_diffusion"


# === ECHO DECAY MODELS ===

@dataclass(frozen=True)
class MonoDecay:
    """V(tau) = A exp(-2 tau / T2)"""
    A: float
    T2: float

    kind = DecayKind.MONO
    parameter_names = ('A', 'T2')

    def __post_init__(self):
        if self.A < 0 or not self.T2 > 0:
            raise InputError(f"Mono decay needs A >= 0 and T2 > 0 (got {self.A}, {self.T2})")


@dataclass(frozen=True)
class StretchedDecay:
    """V(tau) = A exp(-(2 tau / T2)^n), 1 <= n <= 3"""
    A: float
    T2: float
    n: float

    kind = DecayKind.STRETCHED
    parameter_names = ('A', 'T2', 'n')

    def __post_init__(self):
        if self.A < 0 or not self.T2 > 0:
            raise InputError(f"Stretched decay needs A >= 0 and T2 > 0 (got {self.A}, {self.T2})")
        if not 1.0 <= self.n <= 3.0:
            raise InputError(f"Stretching exponent must lie in [1, 3], got {self.n}")


@dataclass(frozen=True)
class ModulatedBiDecay:
    """Inner transition plus ESEEM-modulated outer transition"""
    A_inner: float
    T2_inner: float
    A_outer: float
    T2_outer: float
    omega_mod: float     # rad/s
    phase: float = 0.0   # rad

    kind = DecayKind.MODULATED_BI
    parameter_names = ('A_inner', 'T2_inner', 'A_outer', 'T2_outer', 'omega_mod', 'phase')

    def __post_init__(self):
        if self.A_inner < 0 or self.A_outer < 0:
            raise InputError("Amplitudes must be non-negative")
        if not (self.T2_inner > 0 and self.T2_outer > 0):
            raise InputError("Time constants must be positive")


EchoDecayModel = Union[MonoDecay, StretchedDecay, ModulatedBiDecay]

MODEL_CLASSES = {
    DecayKind.MONO: MonoDecay,
    DecayKind.STRETCHED: StretchedDecay,
    DecayKind.MODULATED_BI: ModulatedBiDecay,
}


def model_from_parameters(kind: DecayKind, params: Dict[str, float]) -> EchoDecayModel:
    cls = MODEL_CLASSES[kind]
    return cls(**{name: params[name] for name in cls.parameter_names})


def _as_tau(tau: ArrayLike) -> np.ndarray:
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0) or np.any(np.isnan(tau_arr)):
        raise DomainError("Echo delay tau must be non-negative")
    return tau_arr


def evaluate_decay(model: EchoDecayModel, tau: ArrayLike):
    tau_arr = _as_tau(tau)
    if isinstance(model, MonoDecay):
        V = model.A * np.exp(-2.0 * tau_arr / model.T2)
    elif isinstance(model, StretchedDecay):
        V = model.A * np.exp(-np.power(2.0 * tau_arr / model.T2, model.n))
    elif isinstance(model, ModulatedBiDecay):
        V = (model.A_inner * np.exp(-2.0 * tau_arr / model.T2_inner)
             + model.A_outer * np.exp(-2.0 * tau_arr / model.T2_outer)
             * np.cos(model.omega_mod * tau_arr + model.phase))
    else:
        raise InputError(f"Unsupported echo decay model {type(model).__name__}")
    return float(V) if V.ndim == 0 else V


def decay_jacobian(model: EchoDecayModel, tau: ArrayLike) -> np.ndarray:
    """Analytic d V / d params, columns in parameter_names order (Mono and Stretched)"""
    tau_arr = np.atleast_1d(_as_tau(tau))
    if isinstance(model, MonoDecay):
        e = np.exp(-2.0 * tau_arr / model.T2)
        return np.column_stack([e, model.A * e * 2.0 * tau_arr / model.T2 ** 2])
    if isinstance(model, StretchedDecay):
        x = 2.0 * tau_arr / model.T2
        xn = np.power(x, model.n)
        e = np.exp(-xn)
        with np.errstate(divide='ignore', invalid='ignore'):
            log_x = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), 0.0)
        return np.column_stack([
            e,
            model.A * e * model.n * xn / model.T2,
            -model.A * e * xn * log_x,
        ])
    raise InputError(f"No analytic Jacobian for {type(model).__name__}")


# === REGIME ANALYSIS ===

@dataclass(frozen=True)
class RegimeReport:
    D: float                  # m^2/s
    D_min: float              # m^2/s
    c_d3: float
    regime: Regime
    dominant_exponent: float
    exponent_upper: float     # equals dominant_exponent outside the rigid limit
    low_concentration: bool

    def as_dict(self) -> Dict[str, object]:
        return {
            'D_m2_s': self.D,
            'D_min_m2_s': self.D_min,
            'c_d3': self.c_d3,
            'regime': self.regime.value,
            'dominant_exponent': self.dominant_exponent,
            'exponent_upper': self.exponent_upper,
            'low_concentration': self.low_concentration,
        }


def concentration_criterion(c: float, d: float) -> Tuple[float, bool]:
    """c in spins/m^3, d in m: (c d^3, c d^3 < threshold)"""
    c_d3 = c * d ** 3
    return c_d3, c_d3 < REGIME_CONFIG['low_concentration_threshold']


def crossover_diffusion(species: NuclearSpecies, d: float) -> float:
    """Diffusion coefficient (m^2/s) at the intermediate/fast crossover: 0.1 gamma_e gamma_n hbar / d"""
    if not d > 0:
        raise DomainError(f"Distance of closest approach must be positive, got {d}")
    coupling = CONSTANTS.mu0_over_4pi * abs(CONSTANTS.gamma_e * species.gamma_n) * CONSTANTS.hbar
    return REGIME_CONFIG['crossover_prefactor'] * coupling / d


def classify_regime(D: float, D_min: float, c_d3: float) -> RegimeReport:
    rigid_cutoff = REGIME_CONFIG['rigid_fraction'] * D_min
    if D >= D_min:
        regime = Regime.FAST_DIFFUSION
        exponent = upper = REGIME_CONFIG['fast_diffusion_exponent']
    elif D >= rigid_cutoff and D > 0:
        regime = Regime.SLOW_DIFFUSION
        exponent = upper = REGIME_CONFIG['slow_diffusion_exponent']
    else:
        regime = Regime.RIGID
        exponent, upper = REGIME_CONFIG['rigid_exponent_range']
    return RegimeReport(
        D=D,
        D_min=D_min,
        c_d3=c_d3,
        regime=regime,
        dominant_exponent=exponent,
        exponent_upper=upper,
        low_concentration=c_d3 < REGIME_CONFIG['low_concentration_threshold'],
    )


def scaling_exponent(T2_series: Sequence[float], D_series: Sequence[float]) -> Tuple[float, float]:
    """p and its standard error for T2 ~ D^(-p), least squares in log-log space"""
    T2 = np.asarray(T2_series, dtype=float)
    D = np.asarray(D_series, dtype=float)
    if T2.shape != D.shape or T2.ndim != 1:
        raise InputError("T2 and D series must be one-dimensional and of equal length")
    if len(T2) < 2:
        raise InputError("Scaling analysis needs at least two points")
    if np.any(T2 <= 0) or np.any(D <= 0):
        raise InputError("T2 and D values must be positive")

    x = np.log(D)
    y = np.log(T2)
    x_mean = x.mean()
    Sxx = float(np.sum((x - x_mean) ** 2))
    if Sxx == 0:
        raise InputError("D series is constant; slope undefined")
    slope = float(np.sum((x - x_mean) * (y - y.mean())) / Sxx)
    intercept = y.mean() - slope * x_mean
    if len(T2) > 2:
        ssr = float(np.sum((y - intercept - slope * x) ** 2))
        stderr = math.sqrt(ssr / (len(T2) - 2) / Sxx)
    else:
        stderr = 0.0
    return -slope, stderr


def infer_diffusion_ratio(T2_from: float, T2_to: float, p: float) -> float:
    """D_to / D_from implied by a T2 change under T2 ~ D^(-p)"""
    if not (T2_from > 0 and T2_to > 0):
        raise InputError("T2 values must be positive")
    if p == 0:
        raise DomainError("Scaling exponent p must be non-zero to invert")
    return (T2_to / T2_from) ** (-1.0 / p)
