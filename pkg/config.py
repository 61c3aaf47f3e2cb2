# -*- coding: utf-8 -*-
"""
Complete configuration for the relaxkit spin-relaxation toolkit
Defaults for physics, fitting, regime analysis, logging and the command line
"""

import copy
import json
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from exceptions import ConfigError


class Quantity(Enum):
    T1 = "T1"
    T2 = "T2"


class HyperfineLine(Enum):
    MI_0 = "MI_0"
    MI_MINUS1_INNER = "MI_minus1_inner"
    MI_MINUS1_OUTER = "MI_minus1_outer"


# === PHYSICS CONFIGURATION ===
PHYSICS_CONFIG = {
    'field_B0_T': 0.34,                 # X-band; not stated by the measurements
    'default_t2_ratio': 2.0 / 3.0,      # Orbach-only T2/T1
    'default_closest_approach_nm': 0.35,
    'default_fullerene_radius_nm': 0.35,
}

# === SOLVENT MODEL CONFIGURATION ===
SOLVENT_CONFIG = {
    'perry_toluene': {
        'prefactor': 4.089e21,          # spins/cm^3
        'base': 0.26655,
        'critical_K': 591.8,
        'exponent': 0.2878,
        'valid_range_K': (150.0, 330.0),
    },
    'toluene_self_diffusion': {
        'D_inf_cm2_s': 6.1e-4,
        'activation_K': 1000.0,
        'freeze_K': 190.0,
        'exponent': 6.0,
        'valid_range_K': (135.0, 330.0),
    },
}

# Standard reference data for the frozen glass mixture
REFERENCE_MIXTURES = {
    'cs2_s2cl2': [
        {'label': 'CS2', 'density_g_cm3': 1.266, 'molar_mass_g_mol': 76.14,
         'nuclei_per_molecule': {'C': 1, 'S': 2}, 'volume_fraction': 0.75},
        {'label': 'S2Cl2', 'density_g_cm3': 1.688, 'molar_mass_g_mol': 135.04,
         'nuclei_per_molecule': {'S': 2, 'Cl': 2}, 'volume_fraction': 0.25},
    ],
}

# === FITTING CONFIGURATION ===
FIT_CONFIG = {
    'chi2_rtol': 1e-10,                 # relative chi^2 change for convergence
    'step_rtol': 1e-12,                 # relative step norm for convergence
    'chi2_floor': 1e-28,                # absolute chi^2 treated as exact fit
    'max_iterations': 200,
    'initial_damping': 1e-3,
    'damping_increase': 10.0,
    'damping_decrease': 10.0,
    'max_damping': 1e16,
    'fd_relative_step': 1e-6,           # central finite differences
    'singular_condition': 1e14,
    'weighted': True,
    'default_sigma_fraction': 0.05,     # used when sigma is missing
    'bisection_rtol': 1e-10,
    'bisection_max_iterations': 400,
    'diffusion_bracket_m2_s': (1e-22, 1e-4),
    'min_orbach_points': 3,
    'grid_workers': 4,
    'exclusion_penalty': 1.0,           # pointwise inconsistency per excluded point, (ln D)^2 units
}

# === REGIME ANALYSIS CONFIGURATION ===
REGIME_CONFIG = {
    'crossover_prefactor': 0.1,
    'rigid_fraction': 1e-7,             # rigid below rigid_fraction * D_min
    'low_concentration_threshold': 0.1,
    'rigid_exponent_range': (2.0, 3.0),
    'slow_diffusion_exponent': 9.0 / 8.0,
    'fast_diffusion_exponent': 1.0,
}

# === LOGGING CONFIGURATION ===
LOGGING_CONFIG = {
    'log_level': 'WARNING',
    'log_file': None,                   # stderr only unless set
    'json_format': False,
}

# === COMMAND LINE CONFIGURATION ===
CLI_CONFIG = {
    'exit_codes': {
        'success': 0,
        'input_error': 2,
        'not_converged': 3,
    },
    'default_temperature_grid': '170:300:27',
    'report_json': 'report.json',
    'report_text': 'report.txt',
    'plot_tsv': 'plot.tsv',
    'table_tsv': 'table.tsv',
}

# Skeleton every user document is merged into
DEFAULT_CONFIG_DOCUMENT: Dict[str, Any] = {
    'field_B0': PHYSICS_CONFIG['field_B0_T'],
    'species': {},
    'viscosity': {},
    'solvents': {},
    'mixtures': {},
    'channels': [],
    'regime': {},
    'echo': {},
    'fit': {
        'weighted': FIT_CONFIG['weighted'],
        'seed': None,
    },
}

_SECTION_TYPES = {
    'species': dict,
    'viscosity': dict,
    'solvents': dict,
    'mixtures': dict,
    'channels': list,
    'regime': dict,
    'echo': dict,
    'fit': dict,
}


def validate_configuration():
    """Validate the module-level defaults"""
    errors = []

    if PHYSICS_CONFIG['field_B0_T'] <= 0:
        errors.append("Default field B0 must be positive")
    if not 0 < PHYSICS_CONFIG['default_t2_ratio'] <= 1:
        errors.append("Default T2/T1 ratio must lie in (0, 1]")

    if FIT_CONFIG['max_iterations'] < 1:
        errors.append("max_iterations must be at least 1")
    if FIT_CONFIG['initial_damping'] <= 0:
        errors.append("initial_damping must be positive")
    if FIT_CONFIG['damping_increase'] <= 1 or FIT_CONFIG['damping_decrease'] <= 1:
        errors.append("Damping factors must exceed 1")
    lo, hi = FIT_CONFIG['diffusion_bracket_m2_s']
    if not 0 < lo < hi:
        errors.append("Diffusion bracket must satisfy 0 < lo < hi")
    if not 0 < FIT_CONFIG['default_sigma_fraction'] < 1:
        errors.append("default_sigma_fraction must lie in (0, 1)")

    if not 0 < REGIME_CONFIG['rigid_fraction'] < 1:
        errors.append("rigid_fraction must lie in (0, 1)")

    for name, components in REFERENCE_MIXTURES.items():
        total = sum(c['volume_fraction'] for c in components)
        if abs(total - 1.0) > 1e-9:
            errors.append(f"Reference mixture {name} volume fractions sum to {total}")

    if errors:
        raise ValueError("Configuration validation failed:\n" + "\n".join(errors))

    return True


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def validate_config_document(document: Dict[str, Any]) -> Dict[str, Any]:
    """Structural validation; model-level checks happen in model_factory"""
    if not isinstance(document, dict):
        raise ConfigError("top level must be an object")

    field_B0 = document.get('field_B0')
    if isinstance(field_B0, bool) or not isinstance(field_B0, (int, float)):
        raise ConfigError("must be a number (tesla)", field='field_B0')
    if field_B0 <= 0:
        raise ConfigError("must be > 0", field='field_B0')

    for section, expected in _SECTION_TYPES.items():
        if not isinstance(document.get(section), expected):
            raise ConfigError(f"must be a{'n object' if expected is dict else ' list'}", field=section)

    for index, channel in enumerate(document['channels']):
        where = f"channels[{index}]"
        if not isinstance(channel, dict):
            raise ConfigError("must be an object", field=where)
        if channel.get('type') not in ('orbach', 'translational_diffusion'):
            raise ConfigError("type must be 'orbach' or 'translational_diffusion'", field=f"{where}.type")

    seed = document['fit'].get('seed')
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("must be an integer", field='fit.seed')

    return document


def load_config_document(path: Optional[str] = None) -> Dict[str, Any]:
    """Read a JSON configuration document and merge it over the defaults"""
    if path is None:
        return validate_config_document(copy.deepcopy(DEFAULT_CONFIG_DOCUMENT))

    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")

    try:
        with open(path, 'r', encoding='utf-8') as f:
            user_document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read configuration ({e})")

    if not isinstance(user_document, dict):
        raise ConfigError(f"{path}: top level must be an object")

    return validate_config_document(_deep_merge(DEFAULT_CONFIG_DOCUMENT, user_document))


def channel_names(document: Dict[str, Any]) -> List[str]:
    """Channel labels in document order, defaulting to type plus index"""
    return [c.get('name') or f"{c['type']}_{i}" for i, c in enumerate(document['channels'])]


if __name__ == "__main__":
    try:
        validate_configuration()
        print("✅ Configuration validated successfully")
        print("🧲 Field B0: {} T".format(PHYSICS_CONFIG['field_B0_T']))
        print("🎯 Max iterations: {}".format(FIT_CONFIG['max_iterations']))
    except ValueError as e:
        print("❌ Configuration Error: {}".format(e))
