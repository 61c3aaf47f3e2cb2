"""
Temperature-dependent solvent properties: nuclear-spin concentration,
self-diffusion, viscosity, Stokes-Einstein diffusion and mixture stoichiometry.

Every model evaluates in SI (spins/m^3, m^2/s, Pa s). Table and parametric
inputs are given in the conventional units the measurements are quoted in.
Out-of-range temperatures still produce a value; the returned FlaggedValue
carries in_range=False so callers can report it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config import SOLVENT_CONFIG
from exceptions import DomainError, InputError
from physconst import CONSTANTS, NuclearSpecies

logger = logging.getLogger(__name__)


class FlaggedValue(NamedTuple):
    value: float
    in_range: bool


def _check_temperature(T: float, model: str):
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"{model}: temperature must be positive and finite, got {T}")


def _in_range(T: float, valid_range: Optional[Tuple[float, float]]) -> bool:
    if valid_range is None:
        return True
    return valid_range[0] <= T <= valid_range[1]


class TemperatureModel:
    """Shared evaluation surface: model(T) gives the SI value, evaluate(T) adds the range flag"""

    valid_range: Optional[Tuple[float, float]] = None

    def evaluate(self, T: float) -> FlaggedValue:
        raise NotImplementedError

    def __call__(self, T: float) -> float:
        return self.evaluate(T).value


def _validate_points(points: Sequence[Tuple[float, float]], what: str) -> Tuple[Tuple[float, float], ...]:
    cleaned = tuple((float(t), float(v)) for t, v in points)
    if len(cleaned) < 2:
        raise InputError(f"{what} table needs at least two points")
    temps = [t for t, _ in cleaned]
    if any(b <= a for a, b in zip(temps, temps[1:])):
        raise InputError(f"{what} table temperatures must be strictly increasing")
    if any(v <= 0 for _, v in cleaned):
        raise InputError(f"{what} table values must be positive")
    return cleaned


def _log_linear(points: Tuple[Tuple[float, float], ...], T: float) -> float:
    """Log-linear interpolation with log-linear extrapolation from the end segments"""
    temps = np.array([t for t, _ in points])
    logs = np.log([v for _, v in points])
    index = int(np.searchsorted(temps, T))
    if index < len(temps) and temps[index] == T:
        return points[index][1]
    index = min(max(index, 1), len(temps) - 1)
    t0, t1 = temps[index - 1], temps[index]
    slope = (logs[index] - logs[index - 1]) / (t1 - t0)
    return float(math.exp(logs[index - 1] + slope * (T - t0)))


# === NUCLEAR-SPIN CONCENTRATION ===

@dataclass(frozen=True)
class PerryTolueneConcentration(TemperatureModel):
    """1H concentration of liquid toluene from the Perry density correlation"""
    prefactor: float = SOLVENT_CONFIG['perry_toluene']['prefactor']
    base: float = SOLVENT_CONFIG['perry_toluene']['base']
    critical_K: float = SOLVENT_CONFIG['perry_toluene']['critical_K']
    exponent: float = SOLVENT_CONFIG['perry_toluene']['exponent']
    valid_range: Tuple[float, float] = SOLVENT_CONFIG['perry_toluene']['valid_range_K']

    def per_cm3(self, T: float) -> FlaggedValue:
        _check_temperature(T, "Perry toluene concentration")
        if T >= self.critical_K:
            raise DomainError(f"Perry toluene concentration undefined at or above {self.critical_K} K (got {T})")
        power = 1.0 + (1.0 - T / self.critical_K) ** self.exponent
        return FlaggedValue(self.prefactor * self.base ** (-power), _in_range(T, self.valid_range))

    def evaluate(self, T: float) -> FlaggedValue:
        c, ok = self.per_cm3(T)
        return FlaggedValue(c * CONSTANTS.per_m3_per_per_cm3, ok)


@dataclass(frozen=True)
class ConstantConcentration(TemperatureModel):
    c_per_cm3: float

    def __post_init__(self):
        if not self.c_per_cm3 >= 0:
            raise InputError(f"Constant concentration must be non-negative, got {self.c_per_cm3}")

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "constant concentration")
        return FlaggedValue(self.c_per_cm3 * CONSTANTS.per_m3_per_per_cm3, True)


@dataclass(frozen=True)
class TableConcentration(TemperatureModel):
    points: Tuple[Tuple[float, float], ...]   # (K, spins/cm^3)

    def __post_init__(self):
        object.__setattr__(self, 'points', _validate_points(self.points, "Concentration"))

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.points[0][0], self.points[-1][0]

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "concentration table")
        return FlaggedValue(_log_linear(self.points, T) * CONSTANTS.per_m3_per_per_cm3,
                            _in_range(T, self.valid_range))


# === VISCOSITY ===

@dataclass(frozen=True)
class TableViscosity(TemperatureModel):
    points: Tuple[Tuple[float, float], ...]   # (K, Pa s)

    def __post_init__(self):
        object.__setattr__(self, 'points', _validate_points(self.points, "Viscosity"))

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.points[0][0], self.points[-1][0]

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "viscosity table")
        return FlaggedValue(_log_linear(self.points, T), _in_range(T, self.valid_range))


@dataclass(frozen=True)
class VogelFulcherViscosity(TemperatureModel):
    """eta(T) = eta0 * exp(B / (T - T0))"""
    eta0: float          # Pa s
    B: float             # K
    T0: float            # K
    valid_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.eta0 <= 0 or self.B < 0 or self.T0 < 0:
            raise InputError("Vogel-Fulcher viscosity needs eta0 > 0, B >= 0, T0 >= 0")

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "Vogel-Fulcher viscosity")
        if T <= self.T0:
            raise DomainError(f"Vogel-Fulcher viscosity diverges at T <= T0 = {self.T0} K (got {T})")
        return FlaggedValue(self.eta0 * math.exp(self.B / (T - self.T0)), _in_range(T, self.valid_range))


# === DIFFUSION ===

def stokes_einstein(T: float, a: float, eta: float) -> float:
    """D = kB T / (6 pi a eta) in m^2/s"""
    if not (T > 0 and a > 0 and eta > 0):
        raise DomainError(f"Stokes-Einstein needs positive T, a, eta (got {T}, {a}, {eta})")
    return CONSTANTS.kB * T / (6.0 * math.pi * a * eta)


@dataclass(frozen=True)
class TolueneSelfDiffusion(TemperatureModel):
    """D(T) = D_inf * exp(-Ea/T) * exp(-(Tf/T)^m), D_inf in cm^2/s"""
    D_inf_cm2_s: float = SOLVENT_CONFIG['toluene_self_diffusion']['D_inf_cm2_s']
    activation_K: float = SOLVENT_CONFIG['toluene_self_diffusion']['activation_K']
    freeze_K: float = SOLVENT_CONFIG['toluene_self_diffusion']['freeze_K']
    exponent: float = SOLVENT_CONFIG['toluene_self_diffusion']['exponent']
    valid_range: Tuple[float, float] = SOLVENT_CONFIG['toluene_self_diffusion']['valid_range_K']

    def cm2_per_s(self, T: float) -> FlaggedValue:
        _check_temperature(T, "toluene self-diffusion")
        D = self.D_inf_cm2_s * math.exp(-self.activation_K / T) * math.exp(-(self.freeze_K / T) ** self.exponent)
        return FlaggedValue(D, _in_range(T, self.valid_range))

    def evaluate(self, T: float) -> FlaggedValue:
        D, ok = self.cm2_per_s(T)
        return FlaggedValue(D * CONSTANTS.m2_s_per_cm2_s, ok)


@dataclass(frozen=True)
class ParametricDiffusion(TemperatureModel):
    """Same closed form as the toluene correlation with free constants"""
    D0_cm2_s: float
    activation_K: float
    freeze_K: float = 0.0
    exponent: float = 6.0
    valid_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.D0_cm2_s <= 0:
            raise InputError(f"Parametric diffusion prefactor must be positive, got {self.D0_cm2_s}")

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "parametric diffusion")
        D = self.D0_cm2_s * math.exp(-self.activation_K / T)
        if self.freeze_K > 0:
            D *= math.exp(-(self.freeze_K / T) ** self.exponent)
        return FlaggedValue(D * CONSTANTS.m2_s_per_cm2_s, _in_range(T, self.valid_range))


@dataclass(frozen=True)
class StokesEinsteinDiffusion(TemperatureModel):
    radius_m: float
    viscosity: TemperatureModel

    def __post_init__(self):
        if self.radius_m <= 0:
            raise InputError(f"Hydrodynamic radius must be positive, got {self.radius_m}")

    @property
    def valid_range(self) -> Optional[Tuple[float, float]]:
        return self.viscosity.valid_range

    def evaluate(self, T: float) -> FlaggedValue:
        eta, ok = self.viscosity.evaluate(T)
        return FlaggedValue(stokes_einstein(T, self.radius_m, eta), ok)


@dataclass(frozen=True)
class TableDiffusion(TemperatureModel):
    points: Tuple[Tuple[float, float], ...]   # (K, cm^2/s)

    def __post_init__(self):
        object.__setattr__(self, 'points', _validate_points(self.points, "Diffusion"))

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.points[0][0], self.points[-1][0]

    def evaluate(self, T: float) -> FlaggedValue:
        _check_temperature(T, "diffusion table")
        return FlaggedValue(_log_linear(self.points, T) * CONSTANTS.m2_s_per_cm2_s,
                            _in_range(T, self.valid_range))


@dataclass(frozen=True)
class SumDiffusion(TemperatureModel):
    """Pointwise sum, e.g. solute plus solvent self-diffusion"""
    terms: Tuple[TemperatureModel, ...]

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        if not self.terms:
            raise InputError("Sum diffusion model needs at least one term")

    def evaluate(self, T: float) -> FlaggedValue:
        parts = [term.evaluate(T) for term in self.terms]
        return FlaggedValue(sum(p.value for p in parts), all(p.in_range for p in parts))


def proton_concentration_toluene(T: float) -> FlaggedValue:
    """1H concentration of toluene in spins/cm^3"""
    return PerryTolueneConcentration().per_cm3(T)


def toluene_self_diffusion(T: float) -> FlaggedValue:
    """Toluene self-diffusion coefficient in cm^2/s"""
    return TolueneSelfDiffusion().cm2_per_s(T)


# === MIXTURES ===

@dataclass(frozen=True)
class MixtureComponent:
    label: str
    density: float                    # g/cm^3
    molar_mass: float                 # g/mol
    nuclei_per_molecule: Dict[str, int] = field(default_factory=dict)
    volume_fraction: float = 1.0

    def __post_init__(self):
        if self.density is None or self.molar_mass is None:
            raise InputError(f"{self.label}: density and molar mass are required")
        if self.density <= 0 or self.molar_mass <= 0:
            raise InputError(f"{self.label}: density and molar mass must be positive")
        if not 0.0 <= self.volume_fraction <= 1.0:
            raise InputError(f"{self.label}: volume fraction must lie in [0, 1]")

    @property
    def molar_density(self) -> float:
        """mol/cm^3 contributed to the mixture"""
        return self.volume_fraction * self.density / self.molar_mass

    def nuclei_count(self, species: NuclearSpecies) -> float:
        """Spins of `species` per molecule; isotope keys are enriched, element keys use abundance"""
        if species.label in self.nuclei_per_molecule:
            return float(self.nuclei_per_molecule[species.label])
        return float(self.nuclei_per_molecule.get(species.element, 0)) * species.abundance


def _check_mixture(components: Sequence[MixtureComponent]):
    if not components:
        raise InputError("Mixture needs at least one component")
    total = sum(c.volume_fraction for c in components)
    if abs(total - 1.0) > 1e-9:
        raise InputError(f"Mixture volume fractions must sum to 1, got {total:.12g}")


def mole_fractions(components: Sequence[MixtureComponent]) -> Dict[str, float]:
    _check_mixture(components)
    total = sum(c.molar_density for c in components)
    if total <= 0:
        raise InputError("Mixture has no material")
    return {c.label: c.molar_density / total for c in components}


def mixture_concentration(components: Sequence[MixtureComponent], species: NuclearSpecies) -> float:
    """Concentration of `species` spins in the mixture, spins/cm^3"""
    _check_mixture(components)
    return sum(c.molar_density * CONSTANTS.N_A * c.nuclei_count(species) for c in components)


def components_from_records(records: List[Dict]) -> List[MixtureComponent]:
    """Build components from config-style records"""
    components = []
    for record in records:
        components.append(MixtureComponent(
            label=record.get('label', 'component'),
            density=record.get('density_g_cm3'),
            molar_mass=record.get('molar_mass_g_mol'),
            nuclei_per_molecule=dict(record.get('nuclei_per_molecule', {})),
            volume_fraction=float(record.get('volume_fraction', 1.0)),
        ))
    return components
