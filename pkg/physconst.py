"""
Physical constants, nuclear-species registry and unit conversions.

Values come from scipy.constants (CODATA). Everything inside relaxkit is SI;
conventional units (meV, cm^-1, cm^2/s, nm, us, spins/cm^3) only appear at the
API and command-line boundaries through the conversions defined here.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

from scipy import constants as sc

from exceptions import DomainError, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in SI units"""
    kB: float = sc.k                                                    # J/K
    hbar: float = sc.hbar                                               # J s
    gamma_e: float = sc.physical_constants["electron gyromag. ratio"][0]  # rad s^-1 T^-1
    mu0_over_4pi: float = sc.mu_0 / (4.0 * math.pi)                     # T m / A
    N_A: float = sc.N_A                                                 # 1/mol

    # conversion factors, all "SI per conventional unit"
    J_per_meV: float = sc.eV * 1e-3
    J_per_cm_inv: float = sc.h * sc.c * 100.0
    m2_s_per_cm2_s: float = 1e-4
    m_per_nm: float = 1e-9
    s_per_us: float = 1e-6
    per_m3_per_per_cm3: float = 1e6

    @property
    def cm_inv_per_meV(self) -> float:
        return self.J_per_meV / self.J_per_cm_inv


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class NuclearSpecies:
    """A bath nucleus: gyromagnetic ratio, spin and natural abundance"""
    label: str
    gamma_n: float          # rad s^-1 T^-1
    spin_I: float
    abundance: float
    element: str = ""

    def __post_init__(self):
        if self.gamma_n == 0 or not math.isfinite(self.gamma_n):
            raise InputError(f"{self.label}: gyromagnetic ratio must be finite and non-zero")
        # spinless isotopes (I = 0) are representable; the registry ships only I > 0
        if self.spin_I < 0 or abs(2 * self.spin_I - round(2 * self.spin_I)) > 1e-12:
            raise InputError(f"{self.label}: spin must be a non-negative half-integer, got {self.spin_I}")
        if not 0.0 <= self.abundance <= 1.0:
            raise InputError(f"{self.label}: abundance must lie in [0, 1], got {self.abundance}")

    @property
    def gamma_over_2pi_MHz_T(self) -> float:
        return self.gamma_n / (2.0 * math.pi) / 1e6


def _from_MHz_T(value: float) -> float:
    return 2.0 * math.pi * value * 1e6


SPECIES_REGISTRY: Dict[str, NuclearSpecies] = {
    '1H': NuclearSpecies('1H', sc.physical_constants["proton gyromag. ratio"][0], 0.5, 0.999885, 'H'),
    '2H': NuclearSpecies('2H', sc.physical_constants["deuteron mag. mom."][0] / sc.hbar, 1.0, 0.000115, 'H'),
    '35Cl': NuclearSpecies('35Cl', _from_MHz_T(4.17654), 1.5, 0.7576, 'Cl'),
    '37Cl': NuclearSpecies('37Cl', _from_MHz_T(3.47656), 1.5, 0.2424, 'Cl'),
    '14N': NuclearSpecies('14N', _from_MHz_T(3.07770), 1.0, 0.99636, 'N'),
}

# Strong Raman lines of the fullerene cage, cm^-1
VIBRATIONAL_MODES: Dict[str, float] = {
    'Hg(1)': 273.0,
    'Ag(1)': 497.0,
}

UNIT_FAMILIES: Dict[str, Dict[str, float]] = {
    'energy': {
        'J': 1.0,
        'meV': CONSTANTS.J_per_meV,
        'cm-1': CONSTANTS.J_per_cm_inv,
        'K': CONSTANTS.kB,
    },
    'length': {'m': 1.0, 'nm': CONSTANTS.m_per_nm, 'cm': 1e-2},
    'time': {'s': 1.0, 'ms': 1e-3, 'us': CONSTANTS.s_per_us},
    'diffusion': {'m2/s': 1.0, 'cm2/s': CONSTANTS.m2_s_per_cm2_s},
    'concentration': {'m-3': 1.0, 'cm-3': CONSTANTS.per_m3_per_per_cm3},
}

_UNIT_ALIASES = {
    'cm^-1': 'cm-1', 'cm⁻¹': 'cm-1', '1/cm': 'cm-1',
    'μs': 'us', 'µs': 'us',
    'm^2/s': 'm2/s', 'm²/s': 'm2/s', 'cm^2/s': 'cm2/s', 'cm²/s': 'cm2/s',
    'm^-3': 'm-3', 'm⁻³': 'm-3', 'cm^-3': 'cm-3', 'cm⁻³': 'cm-3', 'spins/cm3': 'cm-3',
}


def _resolve_unit(unit: str) -> Tuple[str, str]:
    token = _UNIT_ALIASES.get(unit.strip(), unit.strip())
    for family, units in UNIT_FAMILIES.items():
        if token in units:
            return family, token
    raise InputError(f"Unknown unit '{unit}'")


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert a value between two units of the same family"""
    from_family, from_token = _resolve_unit(from_unit)
    to_family, to_token = _resolve_unit(to_unit)
    if from_family != to_family:
        raise InputError(f"Cannot convert {from_family} unit '{from_unit}' to {to_family} unit '{to_unit}'")
    if from_token == to_token:
        return float(value)
    units = UNIT_FAMILIES[from_family]
    return float(value) * units[from_token] / units[to_token]


def convert_energy(value: float, from_unit: str, to_unit: str) -> float:
    """Energy conversion among J, meV, cm^-1 and K (via kB)"""
    for unit in (from_unit, to_unit):
        if _resolve_unit(unit)[0] != 'energy':
            raise InputError(f"'{unit}' is not an energy unit")
    return convert(value, from_unit, to_unit)


def get_species(label: str) -> NuclearSpecies:
    try:
        return SPECIES_REGISTRY[label]
    except KeyError:
        raise InputError(f"Unknown nuclear species '{label}' (known: {', '.join(SPECIES_REGISTRY)})")


def zeeman_frequencies(B0: float, species: NuclearSpecies) -> Tuple[float, float]:
    """Electron and nuclear Zeeman angular frequencies (rad/s) at field B0 (T)"""
    if not B0 > 0:
        raise DomainError(f"Field B0 must be positive, got {B0}")
    omega_e = abs(CONSTANTS.gamma_e) * B0
    omega_n = abs(species.gamma_n) * B0
    return omega_e, omega_n


def nearest_vibrational_mode(delta_meV: float) -> Tuple[str, float, float]:
    """Closest cage vibrational mode to an energy splitting: (name, mode meV, difference meV)"""
    name, wavenumber = min(
        VIBRATIONAL_MODES.items(),
        key=lambda item: abs(convert_energy(item[1], 'cm-1', 'meV') - delta_meV),
    )
    mode_meV = convert_energy(wavenumber, 'cm-1', 'meV')
    return name, mode_meV, delta_meV - mode_meV
