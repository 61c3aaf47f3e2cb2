"""
Model Factory - turns a validated configuration document into model objects.

Every problem is raised as ConfigError addressed by the dotted field path of the
offending entry (e.g. ``channels[1].d_nm``).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from config import FIT_CONFIG, PHYSICS_CONFIG, REFERENCE_MIXTURES
from echodecay import DecayKind, EchoDecayModel, model_from_parameters
from exceptions import ConfigError, DomainError, InputError
from fitting import DiffusionFitSpec, DiffusionTarget, ParameterSpec, RelaxationDataset
from mechanisms import DiffusionChannel, DiffusionMechanism, OrbachChannel, OrbachParams, RelaxationChannel
from physconst import CONSTANTS, NuclearSpecies, SPECIES_REGISTRY, get_species
from solvent import (
    ConstantConcentration, FlaggedValue, ParametricDiffusion, PerryTolueneConcentration, StokesEinsteinDiffusion,
    TableConcentration, TableDiffusion, TableViscosity, TemperatureModel,
    TolueneSelfDiffusion, VogelFulcherViscosity, components_from_records, mixture_concentration,
)

logger = logging.getLogger(__name__)

# echo parameters given in microseconds in the document
_ECHO_TIME_KEYS = ('T2', 'T2_inner', 'T2_outer')


@dataclass(frozen=True)
class Solvent:
    name: str
    concentration_spec: Dict[str, Any]
    diffusion: TemperatureModel


@dataclass(frozen=True)
class _ZeroDiffusion(TemperatureModel):
    """Immobile solute: all motion comes from the solvent"""

    def evaluate(self, T: float):
        return FlaggedValue(0.0, True)


def _number(section: Dict[str, Any], key: str, where: str, default: Optional[float] = None,
            positive: bool = False, non_negative: bool = False) -> float:
    value = section.get(key, default)
    if value is None:
        raise ConfigError("is required", field=f"{where}.{key}")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError("must be a finite number", field=f"{where}.{key}")
    if positive and value <= 0:
        raise ConfigError("must be > 0", field=f"{where}.{key}")
    if non_negative and value < 0:
        raise ConfigError("must be >= 0", field=f"{where}.{key}")
    return float(value)


def _points(section: Dict[str, Any], where: str) -> Tuple[Tuple[float, float], ...]:
    points = section.get('points')
    if not isinstance(points, list) or not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in points):
        raise ConfigError("must be a list of [temperature_K, value] pairs", field=f"{where}.points")
    try:
        return tuple((float(t), float(v)) for t, v in points)
    except (TypeError, ValueError):
        raise ConfigError("values must be numbers", field=f"{where}.points")


def _wrap(where: str, build):
    """Run a constructor, re-addressing its InputError to `where`"""
    try:
        return build()
    except ConfigError:
        raise
    except (InputError, DomainError) as e:
        raise ConfigError(str(e), field=where)


# === SPECIES ===

def build_species(document: Dict[str, Any], label: str, where: str = "species") -> NuclearSpecies:
    """Registry species, optionally overridden or newly defined under document['species']"""
    override = document.get('species', {}).get(label)
    if override is None:
        try:
            return get_species(label)
        except InputError as e:
            raise ConfigError(str(e), field=where)

    entry = f"species.{label}"
    if not isinstance(override, dict):
        raise ConfigError("must be an object", field=entry)
    base = SPECIES_REGISTRY.get(label)
    if 'gamma_MHz_T' in override:
        gamma = 2.0 * math.pi * _number(override, 'gamma_MHz_T', entry) * 1e6
    elif base is not None:
        gamma = base.gamma_n
    else:
        raise ConfigError("is required for a new species", field=f"{entry}.gamma_MHz_T")
    return _wrap(entry, lambda: NuclearSpecies(
        label=label,
        gamma_n=gamma,
        spin_I=_number(override, 'spin_I', entry, default=base.spin_I if base else None, non_negative=True),
        abundance=_number(override, 'abundance', entry, default=base.abundance if base else 1.0),
        element=str(override.get('element', base.element if base else '')),
    ))


# === SOLVENT MODELS ===

def build_viscosity(spec: Any, where: str) -> TemperatureModel:
    if not isinstance(spec, dict):
        raise ConfigError("must be an object", field=where)
    kind = spec.get('type')
    if kind == 'vogel_fulcher':
        return _wrap(where, lambda: VogelFulcherViscosity(
            eta0=_number(spec, 'eta0_Pa_s', where, positive=True),
            B=_number(spec, 'B_K', where, non_negative=True),
            T0=_number(spec, 'T0_K', where, non_negative=True),
        ))
    if kind == 'table':
        return _wrap(where, lambda: TableViscosity(_points(spec, where)))
    raise ConfigError("type must be 'vogel_fulcher' or 'table'", field=f"{where}.type")


def _named_viscosity(document: Dict[str, Any], name: Any, where: str) -> TemperatureModel:
    if isinstance(name, dict):
        return build_viscosity(name, where)
    models = document.get('viscosity', {})
    if name not in models:
        raise ConfigError(f"unknown viscosity model '{name}'", field=where)
    return build_viscosity(models[name], f"viscosity.{name}")


def build_diffusion(document: Dict[str, Any], spec: Any, where: str) -> TemperatureModel:
    """Diffusion coefficient model in m^2/s from a document entry"""
    if not isinstance(spec, dict):
        raise ConfigError("must be an object", field=where)
    kind = spec.get('type')
    if kind == 'toluene_self':
        return TolueneSelfDiffusion()
    if kind == 'parametric':
        return _wrap(where, lambda: ParametricDiffusion(
            D0_cm2_s=_number(spec, 'D0_cm2_s', where, positive=True),
            activation_K=_number(spec, 'activation_K', where, default=0.0),
            freeze_K=_number(spec, 'freeze_K', where, default=0.0, non_negative=True),
            exponent=_number(spec, 'exponent', where, default=6.0),
        ))
    if kind == 'table':
        return _wrap(where, lambda: TableDiffusion(_points(spec, where)))
    if kind == 'stokes_einstein':
        radius = _number(spec, 'radius_nm', where, default=PHYSICS_CONFIG['default_fullerene_radius_nm'],
                         positive=True)
        viscosity = _named_viscosity(document, spec.get('viscosity'), f"{where}.viscosity")
        return StokesEinsteinDiffusion(radius * CONSTANTS.m_per_nm, viscosity)
    if kind == 'none':
        return _ZeroDiffusion()
    raise ConfigError("type must be one of toluene_self, parametric, table, stokes_einstein, none",
                      field=f"{where}.type")


def build_solvent(document: Dict[str, Any], name: Any, where: str) -> Solvent:
    solvents = document.get('solvents', {})
    if name not in solvents:
        raise ConfigError(f"unknown solvent '{name}'", field=where)
    entry = f"solvents.{name}"
    spec = solvents[name]
    if not isinstance(spec, dict):
        raise ConfigError("must be an object", field=entry)
    concentration = spec.get('concentration')
    if not isinstance(concentration, dict):
        raise ConfigError("must be an object", field=f"{entry}.concentration")
    diffusion_spec = spec.get('diffusion', {'type': 'none'})
    return Solvent(name, concentration, build_diffusion(document, diffusion_spec, f"{entry}.diffusion"))


def mixture_components(document: Dict[str, Any], name: str, where: str):
    records = document.get('mixtures', {}).get(name, REFERENCE_MIXTURES.get(name))
    if records is None:
        raise ConfigError(f"unknown mixture '{name}'", field=where)
    if not isinstance(records, list):
        raise ConfigError("must be a list of components", field=f"mixtures.{name}")
    return _wrap(f"mixtures.{name}", lambda: components_from_records(records))


def build_concentration(document: Dict[str, Any], solvent: Solvent, species: NuclearSpecies) -> TemperatureModel:
    """Spin concentration of `species` in `solvent` (spins/m^3)"""
    spec = solvent.concentration_spec
    where = f"solvents.{solvent.name}.concentration"
    kind = spec.get('type')
    if kind == 'perry_toluene':
        scale = _number(spec, "scale", where, default=1.0, positive=True)
        return PerryTolueneConcentration(prefactor=PerryTolueneConcentration().prefactor * scale)
    if kind == 'constant':
        return _wrap(where, lambda: ConstantConcentration(_number(spec, 'c_per_cm3', where, non_negative=True)))
    if kind == 'table':
        return _wrap(where, lambda: TableConcentration(_points(spec, where)))
    if kind == 'mixture':
        components = mixture_components(document, spec.get('mixture'), f"{where}.mixture")
        c = _wrap(where, lambda: mixture_concentration(components, species))
        return ConstantConcentration(c)
    raise ConfigError("type must be one of perry_toluene, constant, table, mixture", field=f"{where}.type")


# === CHANNELS ===

def build_orbach(spec: Dict[str, Any], where: str) -> OrbachChannel:
    params = _wrap(where, lambda: OrbachParams(
        prefactor_A=_number(spec, 'A_per_s', where, positive=True),
        delta=_number(spec, 'delta_meV', where, positive=True),
    ))
    t2_ratio = _number(spec, 't2_ratio', where, default=PHYSICS_CONFIG['default_t2_ratio'], positive=True)
    return _wrap(where, lambda: OrbachChannel(params, t2_ratio, spec.get('name') or 'orbach'))


def build_diffusion_channel(document: Dict[str, Any], spec: Dict[str, Any], where: str) -> DiffusionChannel:
    species = build_species(document, spec.get('species'), f"{where}.species")
    solvent = build_solvent(document, spec.get('solvent'), f"{where}.solvent")
    d_nm = _number(spec, 'd_nm', where, default=PHYSICS_CONFIG['default_closest_approach_nm'], positive=True)
    solute = build_diffusion(document, spec.get('solute_diffusion', {'type': 'none'}), f"{where}.solute_diffusion")
    mechanism = _wrap(where, lambda: DiffusionMechanism(
        d=d_nm * CONSTANTS.m_per_nm,
        species=species,
        concentration=build_concentration(document, solvent, species),
        solvent_diffusion=solvent.diffusion,
        solute_diffusion=solute,
        B0=float(document['field_B0']),
    ))
    return DiffusionChannel(mechanism, spec.get('name') or solvent.name)


def build_channels(document: Dict[str, Any]) -> List[RelaxationChannel]:
    """Every channel of the document, in order; at least one is required"""
    channels: List[RelaxationChannel] = []
    for index, spec in enumerate(document.get('channels', [])):
        where = f"channels[{index}]"
        if spec['type'] == 'orbach':
            channels.append(build_orbach(spec, where))
        else:
            channels.append(build_diffusion_channel(document, spec, where))
    if not channels:
        raise ConfigError("at least one channel is required", field='channels')
    names = [c.name for c in channels]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigError(f"duplicate channel names: {', '.join(duplicates)}", field='channels')
    logger.debug(f"🔧 Built {len(channels)} channel(s): {', '.join(names)}")
    return channels


def find_orbach_channel(document: Dict[str, Any]) -> OrbachChannel:
    for index, spec in enumerate(document.get('channels', [])):
        if spec.get('type') == 'orbach':
            return build_orbach(spec, f"channels[{index}]")
    raise ConfigError("an orbach channel is required for this command", field='channels')


# === FIT SPECIFICATIONS ===

def _parameter_spec(spec: Any, where: str) -> ParameterSpec:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ParameterSpec(float(spec))
    if not isinstance(spec, dict):
        raise ConfigError("must be a number or an object with initial/lower/upper/fixed", field=where)
    return _wrap(where, lambda: ParameterSpec(
        initial=_number(spec, 'initial', where),
        lower=_number(spec, 'lower', where, default=-math.inf) if 'lower' in spec else -math.inf,
        upper=_number(spec, 'upper', where, default=math.inf) if 'upper' in spec else math.inf,
        fixed=bool(spec.get('fixed', False)),
    ))


def build_diffusion_fit(document: Dict[str, Any], datasets: List[RelaxationDataset]) -> DiffusionFitSpec:
    """Pair loaded datasets (in command-line order) with fit.diffusion.targets"""
    where = "fit.diffusion"
    section = document.get('fit', {}).get('diffusion')
    if not isinstance(section, dict):
        raise ConfigError("must be an object", field=where)
    targets_spec = section.get('targets')
    if not isinstance(targets_spec, list) or len(targets_spec) != len(datasets):
        raise ConfigError(f"must list one target per data file ({len(datasets)} given)", field=f"{where}.targets")

    targets = []
    solvent_diffusion = None
    for index, (spec, dataset) in enumerate(zip(targets_spec, datasets)):
        entry = f"{where}.targets[{index}]"
        if not isinstance(spec, dict):
            raise ConfigError("must be an object", field=entry)
        species = build_species(document, spec.get('species'), f"{entry}.species")
        solvent = build_solvent(document, spec.get('solvent'), f"{entry}.solvent")
        if solvent_diffusion is None:
            solvent_diffusion = solvent.diffusion
        elif solvent.diffusion != solvent_diffusion:
            raise ConfigError("all targets must share one solvent diffusion model "
                              f"(solvents.{spec.get('solvent')}.diffusion differs from target 0)",
                              field=f"{entry}.solvent")
        if spec.get('label'):
            dataset.label = spec['label']
        targets.append(DiffusionTarget(dataset, species, build_concentration(document, solvent, species)))

    solute = {name: _parameter_spec(value, f"{where}.solute.{name}")
              for name, value in section.get('solute', {}).items()}
    grid = section.get('d_grid_nm', [])
    if isinstance(grid, dict):
        lo = _number(grid, 'lower', f"{where}.d_grid_nm", positive=True)
        hi = _number(grid, 'upper', f"{where}.d_grid_nm", positive=True)
        n = int(_number(grid, 'n', f"{where}.d_grid_nm", positive=True))
        grid = [lo + (hi - lo) * i / (n - 1) for i in range(n)] if n > 1 else [lo]

    stokes = None
    if 'stokes_einstein' in section:
        stokes = build_diffusion(document, {'type': 'stokes_einstein', **section['stokes_einstein']},
                                 f"{where}.stokes_einstein")

    return _wrap(where, lambda: DiffusionFitSpec(
        targets=targets,
        solvent_diffusion=solvent_diffusion,
        orbach=find_orbach_channel(document),
        distance_nm=_parameter_spec(section.get('d_nm', {'initial': PHYSICS_CONFIG['default_closest_approach_nm'],
                                                        'lower': 0.05, 'upper': 5.0}), f"{where}.d_nm"),
        solute=solute,
        mode=section.get('mode', 'parametric'),
        d_grid_nm=[float(d) for d in grid],
        B0=float(document['field_B0']),
        weighted=bool(document['fit'].get('weighted', FIT_CONFIG['weighted'])),
        stokes_einstein=stokes,
        extra_starts=list(section.get('extra_starts', [])),
    ))


def echo_settings(document: Dict[str, Any]) -> Tuple[DecayKind, Dict[str, float]]:
    """Echo model kind and fixed parameters (times in the document are microseconds)"""
    section = document.get('echo', {})
    try:
        kind = DecayKind(section.get('kind', DecayKind.MONO.value))
    except ValueError:
        raise ConfigError("must be one of mono, stretched, modulated_bi", field='echo.kind')
    fixed = section.get('fixed', {})
    if not isinstance(fixed, dict):
        raise ConfigError("must be an object", field='echo.fixed')
    return kind, {k: _echo_value(k, _number(fixed, k, 'echo.fixed')) for k in fixed}


def _echo_value(key: str, value: float) -> float:
    return value * CONSTANTS.s_per_us if key in _ECHO_TIME_KEYS else value


def build_echo_model(document: Dict[str, Any]) -> EchoDecayModel:
    """Echo model used to simulate traces, from echo.kind and echo.parameters"""
    kind, _ = echo_settings(document)
    params = document.get('echo', {}).get('parameters')
    if not isinstance(params, dict):
        raise ConfigError("must be an object", field='echo.parameters')
    values = {k: _echo_value(k, _number(params, k, 'echo.parameters')) for k in params}
    try:
        return model_from_parameters(kind, values)
    except KeyError as e:
        raise ConfigError(f"missing parameter {e.args[0]}", field='echo.parameters')
    except InputError as e:
        raise ConfigError(str(e), field='echo.parameters')


def regime_inputs(document: Dict[str, Any]) -> Tuple[NuclearSpecies, float, float]:
    """(species, d in m, bath concentration in spins/m^3) for the regime analysis"""
    section = document.get('regime', {})
    species = build_species(document, section.get('species'), 'regime.species')
    d_nm = _number(section, 'd_nm', 'regime', default=PHYSICS_CONFIG['default_closest_approach_nm'], positive=True)
    if 'c_per_cm3' in section:
        c = _number(section, 'c_per_cm3', 'regime', non_negative=True) * CONSTANTS.per_m3_per_per_cm3
    else:
        solvent = build_solvent(document, section.get('solvent'), 'regime.solvent')
        T = _number(section, 'temperature_K', 'regime', default=100.0, positive=True)
        c = _wrap('regime', lambda: build_concentration(document, solvent, species)(T))
    return species, d_nm * CONSTANTS.m_per_nm, c
