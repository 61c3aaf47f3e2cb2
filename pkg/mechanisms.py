"""
Closed-form electron-spin relaxation rates.

Two mechanisms are modelled: the Orbach process through an excited vibrational
state, and relaxation by translational diffusion of solvent nuclear spins past the
electron spin (hard-sphere, force-free spectral density). Channels compose by
adding rates.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Union

import numpy as np

from config import PHYSICS_CONFIG
from exceptions import DomainError, InputError
from physconst import CONSTANTS, NuclearSpecies, zeeman_frequencies
from solvent import FlaggedValue, TemperatureModel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


class RateResult(NamedTuple):
    R1: float   # 1/s
    R2: float   # 1/s


class TimePoint(NamedTuple):
    T: float
    T1: float   # s, inf when the rate vanishes
    T2: float


@dataclass(frozen=True)
class OrbachParams:
    prefactor_A: float   # 1/s
    delta: float         # meV

    def __post_init__(self):
        if not self.prefactor_A > 0:
            raise InputError(f"Orbach prefactor must be positive, got {self.prefactor_A}")
        if not self.delta > 0:
            raise InputError(f"Orbach splitting must be positive, got {self.delta}")


@dataclass(frozen=True)
class DiffusionMechanism:
    d: float                                  # distance of closest approach, m
    species: NuclearSpecies
    concentration: TemperatureModel           # spins/m^3
    solvent_diffusion: TemperatureModel       # m^2/s
    solute_diffusion: TemperatureModel        # m^2/s
    B0: float = PHYSICS_CONFIG['field_B0_T']

    def __post_init__(self):
        if not self.d > 0:
            raise InputError(f"Distance of closest approach must be positive, got {self.d}")
        if not self.B0 > 0:
            raise InputError(f"Field B0 must be positive, got {self.B0}")

    def total_diffusion(self, T: float) -> FlaggedValue:
        solvent = self.solvent_diffusion.evaluate(T)
        solute = self.solute_diffusion.evaluate(T)
        return FlaggedValue(solvent.value + solute.value, solvent.in_range and solute.in_range)


# === SPECTRAL DENSITY ===

def spectral_density(z: ArrayLike):
    """Hard-sphere translational-diffusion spectral density J(z), J(0) = 1"""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise DomainError("Spectral density argument z must be non-negative")
    z2 = z_arr * z_arr
    z3 = z2 * z_arr
    numerator = 1.0 + 5.0 * z_arr / 8.0 + z2 / 8.0
    denominator = 1.0 + z_arr + z2 + z3 / 6.0 + 4.0 * z2 * z2 / 81.0 + z2 * z3 / 81.0 + z3 * z3 / 648.0
    J = numerator / denominator
    return float(J) if J.ndim == 0 else J


def spectral_density_at(omega: float, tau_D: float) -> float:
    """J evaluated at angular frequency omega for correlation time tau_D"""
    if omega == 0:
        return 1.0
    return spectral_density(math.sqrt(2.0 * abs(omega) * tau_D))


def correlation_time(d: float, D: float) -> float:
    """tau_D = 2 d^2 / D"""
    if not (d > 0 and D > 0):
        raise DomainError(f"Correlation time needs positive d and D (got {d}, {D})")
    return 2.0 * d * d / D


def kappa(species: NuclearSpecies) -> float:
    """Rate prefactor (16 pi / 405) (mu0/4pi)^2 gamma_e^2 gamma_n^2 hbar^2 I(I+1), m^6 s^-2"""
    coupling = CONSTANTS.mu0_over_4pi * CONSTANTS.gamma_e * species.gamma_n * CONSTANTS.hbar
    return 16.0 * math.pi / 405.0 * coupling * coupling * species.spin_I * (species.spin_I + 1.0)


# === DIFFUSION MECHANISM ===

def rates_at_diffusion(mech: DiffusionMechanism, T: float, D: float) -> RateResult:
    """Diffusion-mechanism rates for an explicit total diffusion coefficient D (m^2/s)"""
    c = mech.concentration(T)
    tau_D = correlation_time(mech.d, D)
    omega_e, omega_n = zeeman_frequencies(mech.B0, mech.species)
    J_e = spectral_density_at(omega_e, tau_D)
    J_n = spectral_density_at(omega_n, tau_D)
    prefactor = kappa(mech.species) * c / (mech.d * D)
    R1 = 2.0 * prefactor * 10.0 * J_e
    R2 = prefactor * (4.0 + 10.0 * J_e + 6.0 * J_n)
    return RateResult(R1, R2)


def diffusion_rates(mech: DiffusionMechanism, T: float) -> RateResult:
    D = mech.total_diffusion(T).value
    if not D > 0:
        raise DomainError(f"Total diffusion coefficient must be positive at {T} K, got {D}")
    return rates_at_diffusion(mech, T, D)


# === ORBACH MECHANISM ===

def orbach_rate(p: OrbachParams, T: float, t2_ratio: float = PHYSICS_CONFIG['default_t2_ratio']) -> RateResult:
    """R1 = A exp(-delta / kB T); R2 = R1 / t2_ratio"""
    if not T > 0:
        raise DomainError(f"Orbach rate needs T > 0, got {T}")
    if not 0 < t2_ratio <= 1:
        raise InputError(f"T2/T1 ratio must lie in (0, 1], got {t2_ratio}")
    delta_J = p.delta * CONSTANTS.J_per_meV
    R1 = p.prefactor_A * math.exp(-delta_J / (CONSTANTS.kB * T))
    return RateResult(R1, R1 / t2_ratio)


# === CHANNELS ===

class RelaxationChannel:
    name: str = "channel"

    def rates(self, T: float) -> RateResult:
        raise NotImplementedError


@dataclass(frozen=True)
class OrbachChannel(RelaxationChannel):
    params: OrbachParams
    t2_ratio: float = PHYSICS_CONFIG['default_t2_ratio']
    name: str = "orbach"

    def __post_init__(self):
        if not 0 < self.t2_ratio <= 1:
            raise InputError(f"T2/T1 ratio must lie in (0, 1], got {self.t2_ratio}")

    def rates(self, T: float) -> RateResult:
        return orbach_rate(self.params, T, self.t2_ratio)


@dataclass(frozen=True)
class DiffusionChannel(RelaxationChannel):
    mechanism: DiffusionMechanism
    name: str = "diffusion"

    def rates(self, T: float) -> RateResult:
        return diffusion_rates(self.mechanism, T)


def compose_channels(channels: Sequence[RelaxationChannel], T: float) -> RateResult:
    if not channels:
        raise InputError("At least one relaxation channel is required")
    R1 = 0.0
    R2 = 0.0
    for channel in channels:
        rates = channel.rates(T)
        R1 += rates.R1
        R2 += rates.R2
    return RateResult(R1, R2)


def _reciprocal(rate: float) -> float:
    return math.inf if rate <= 0 else 1.0 / rate


def rates_to_times(T: float, rates: RateResult) -> TimePoint:
    return TimePoint(T, _reciprocal(rates.R1), _reciprocal(rates.R2))


def predict_times(channels: Sequence[RelaxationChannel], temperatures: Sequence[float]) -> List[TimePoint]:
    """T1 and T2 of the composed channels at each temperature"""
    return [rates_to_times(float(T), compose_channels(channels, float(T))) for T in temperatures]
