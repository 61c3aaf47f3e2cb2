#!/usr/bin/env python3
"""
Test script to verify the Orbach and translational-diffusion relaxation rates
"""

import copy
import math

import numpy as np
import pytest

from exceptions import DomainError, InputError
from mechanisms import (
    DiffusionChannel, DiffusionMechanism, OrbachChannel, OrbachParams, compose_channels,
    correlation_time, diffusion_rates, kappa, orbach_rate, predict_times, rates_at_diffusion,
    rates_to_times, spectral_density, spectral_density_at,
)
from model_factory import build_channels
from physconst import NuclearSpecies, get_species, zeeman_frequencies
from solvent import ConstantConcentration, FlaggedValue, TemperatureModel, TolueneSelfDiffusion

D_CUT = 0.35e-9


class _Still(TemperatureModel):
    def evaluate(self, T):
        return FlaggedValue(0.0, True)


def _mechanism(label: str, B0: float = 0.34) -> DiffusionMechanism:
    return DiffusionMechanism(
        d=D_CUT,
        species=get_species(label),
        concentration=ConstantConcentration(5.0e22),
        solvent_diffusion=TolueneSelfDiffusion(),
        solute_diffusion=_Still(),
        B0=B0,
    )


def _narrowing_D(mech: DiffusionMechanism, z_e: float = 1e-6) -> float:
    """Total D that puts the electron-frequency argument of J at z_e"""
    omega_e, _ = zeeman_frequencies(mech.B0, mech.species)
    tau = z_e ** 2 / (2.0 * omega_e)
    return 2.0 * mech.d ** 2 / tau


def test_spectral_density_limits():
    """J(0) = 1 exactly and J decays as 81/z^4"""
    assert spectral_density(0.0) == 1.0
    assert spectral_density_at(0.0, 1e-9) == 1.0
    z = 100.0
    assert spectral_density(z) * z ** 4 == pytest.approx(81.0, rel=0.05)


def test_spectral_density_strictly_decreasing():
    z = np.logspace(-4, 4, 10_000)
    J = spectral_density(z)
    assert J.shape == z.shape
    assert np.all(np.diff(J) < 0)
    assert np.all(J > 0) and np.all(J < 1)


def test_spectral_density_rejects_negative_argument():
    with pytest.raises(DomainError):
        spectral_density(-1.0)
    with pytest.raises(DomainError):
        spectral_density([0.1, float('nan')])


def test_correlation_time():
    assert correlation_time(D_CUT, 1e-9) == pytest.approx(2.45e-10)
    with pytest.raises(DomainError):
        correlation_time(D_CUT, 0.0)


def test_kappa_values():
    assert kappa(get_species('1H')) == pytest.approx(2.297e-44, rel=2e-3)
    ratio = kappa(get_species('1H')) / kappa(get_species('2H'))
    print(f"📊 kappa(1H)/kappa(2H) = {ratio:.4f}")
    assert ratio == pytest.approx(15.9, abs=0.1)


def test_extreme_narrowing_identity():
    """With every J at 1, R1 and R2 coincide"""
    mech = _mechanism('1H')
    D = _narrowing_D(mech)
    rates = rates_at_diffusion(mech, 250.0, D)
    assert abs(rates.R1 - rates.R2) / rates.R1 < 1e-6


def test_isotope_ratio_in_extreme_narrowing():
    proton = _mechanism('1H')
    deuteron = _mechanism('2H')
    D = _narrowing_D(proton)
    ratio = rates_at_diffusion(proton, 250.0, D).R2 / rates_at_diffusion(deuteron, 250.0, D).R2
    expected = kappa(proton.species) / kappa(deuteron.species)
    assert ratio == pytest.approx(expected, rel=1e-3)


def test_diffusion_R2_decreases_with_D():
    mech = _mechanism('1H')
    Ds = np.logspace(-20, -4, 400)
    R2 = [rates_at_diffusion(mech, 200.0, D).R2 for D in Ds]
    assert all(b < a for a, b in zip(R2, R2[1:]))


def test_diffusion_rates_need_motion():
    mech = DiffusionMechanism(d=D_CUT, species=get_species('1H'), concentration=ConstantConcentration(5e22),
                              solvent_diffusion=_Still(), solute_diffusion=_Still())
    with pytest.raises(DomainError):
        diffusion_rates(mech, 200.0)
    with pytest.raises(InputError):
        DiffusionMechanism(d=0.0, species=get_species('1H'), concentration=ConstantConcentration(1.0),
                           solvent_diffusion=_Still(), solute_diffusion=_Still())


def test_spinless_bath_does_not_relax():
    mech = DiffusionMechanism(d=D_CUT, species=NuclearSpecies('32S', 1.0, 0.0, 0.95, 'S'),
                              concentration=ConstantConcentration(5e22), solvent_diffusion=TolueneSelfDiffusion(),
                              solute_diffusion=_Still())
    rates = diffusion_rates(mech, 250.0)
    assert rates.R1 == 0.0 and rates.R2 == 0.0
    assert math.isinf(rates_to_times(250.0, rates).T2)


def test_orbach_rate():
    params = OrbachParams(prefactor_A=4.0e5, delta=60.0)
    hot = orbach_rate(params, 300.0)
    cold = orbach_rate(params, 150.0)
    assert hot.R1 / cold.R1 == pytest.approx(10.185, rel=1e-3)
    assert hot.R2 == pytest.approx(1.5 * hot.R1)
    assert orbach_rate(params, 300.0, t2_ratio=1.0).R2 == pytest.approx(hot.R1)
    with pytest.raises(DomainError):
        orbach_rate(params, 0.0)
    with pytest.raises(InputError):
        OrbachParams(prefactor_A=1.0, delta=0.0)
    with pytest.raises(InputError):
        OrbachChannel(params, t2_ratio=1.5)


def test_orbach_only_channel_gives_two_thirds(orbach_channel):
    for point in predict_times([orbach_channel], [170.0, 230.0, 300.0]):
        assert point.T2 / point.T1 == pytest.approx(2.0 / 3.0)


def test_channels_add_rates(orbach_channel):
    diffusion = DiffusionChannel(_mechanism('1H'), name='h')
    total = compose_channels([orbach_channel, diffusion], 250.0)
    assert total.R1 == pytest.approx(orbach_channel.rates(250.0).R1 + diffusion.rates(250.0).R1)
    assert total.R2 == pytest.approx(orbach_channel.rates(250.0).R2 + diffusion.rates(250.0).R2)
    with pytest.raises(InputError):
        compose_channels([], 250.0)


def test_composite_toluene_shape(toluene_document):
    """Orbach plus h-toluene diffusion gives a non-monotonic T2 on 170-300 K"""
    temps = np.linspace(170.0, 300.0, 131)
    channels = build_channels(toluene_document)
    R2 = np.array([compose_channels(channels, T).R2 for T in temps])
    lowest = int(np.argmin(R2))
    print(f"📈 Total R2 minimum at {temps[lowest]:.1f} K")
    assert 0 < lowest < len(temps) - 1

    T2 = np.array([p.T2 for p in predict_times(channels, temps)])
    steps = np.sign(np.diff(T2))
    assert np.any(steps > 0) and np.any(steps < 0)

    deuterated = copy.deepcopy(toluene_document)
    deuterated['channels'][1].update({'species': '2H', 'solvent': 'd-toluene', 'name': 'd_toluene'})
    T2_d = np.array([p.T2 for p in predict_times(build_channels(deuterated), temps)])
    assert np.all(T2 < T2_d)
