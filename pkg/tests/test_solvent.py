#!/usr/bin/env python3
"""
Test script to verify solvent concentration, viscosity and diffusion models
"""

import numpy as np
import pytest

from config import REFERENCE_MIXTURES
from exceptions import DomainError, InputError
from physconst import get_species
from solvent import (
    ConstantConcentration, MixtureComponent, ParametricDiffusion, PerryTolueneConcentration,
    StokesEinsteinDiffusion, SumDiffusion, TableConcentration, TableDiffusion, TableViscosity,
    TolueneSelfDiffusion, VogelFulcherViscosity, components_from_records, mixture_concentration,
    mole_fractions, proton_concentration_toluene, stokes_einstein, toluene_self_diffusion,
)


def test_perry_concentration_values():
    """Perry density correlation gives about 4.5-5e22 protons/cm^3"""
    assert proton_concentration_toluene(298.0).value == pytest.approx(4.521e22, rel=2e-3)
    assert proton_concentration_toluene(150.0).value == pytest.approx(5.173e22, rel=2e-3)
    for T in np.linspace(150.0, 300.0, 31):
        c = proton_concentration_toluene(T).value
        assert 4.4e22 <= c <= 5.3e22


def test_perry_concentration_si_and_range_flag():
    model = PerryTolueneConcentration()
    assert model(250.0) == pytest.approx(model.per_cm3(250.0).value * 1e6)
    assert model.evaluate(250.0).in_range
    low = model.evaluate(100.0)
    assert not low.in_range
    assert low.value > model(150.0)
    with pytest.raises(DomainError):
        model.per_cm3(600.0)
    with pytest.raises(DomainError):
        model.per_cm3(-5.0)


def test_toluene_self_diffusion_at_room_temperature():
    assert toluene_self_diffusion(300.0).value == pytest.approx(2.04e-5, rel=5e-3)
    assert TolueneSelfDiffusion()(300.0) == pytest.approx(toluene_self_diffusion(300.0).value * 1e-4)


def test_toluene_self_diffusion_is_increasing():
    temps = np.linspace(140.0, 330.0, 100)
    values = [toluene_self_diffusion(T).value for T in temps]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert not toluene_self_diffusion(120.0).in_range


def test_stokes_einstein():
    assert stokes_einstein(300.0, 0.35e-9, 0.56e-3) == pytest.approx(1.1211e-9, rel=1e-3)
    with pytest.raises(DomainError):
        stokes_einstein(300.0, 0.0, 1e-3)


def test_vogel_fulcher_viscosity():
    eta = VogelFulcherViscosity(eta0=1e-4, B=341.0, T0=100.0)
    assert eta(170.0) == pytest.approx(1.0e-4 * np.exp(341.0 / 70.0))
    assert eta(170.0) > eta(250.0)
    with pytest.raises(DomainError):
        eta(90.0)
    with pytest.raises(InputError):
        VogelFulcherViscosity(eta0=-1.0, B=1.0, T0=0.0)


def test_stokes_einstein_model_follows_viscosity():
    eta = VogelFulcherViscosity(eta0=1e-4, B=341.0, T0=100.0)
    model = StokesEinsteinDiffusion(radius_m=0.35e-9, viscosity=eta)
    assert model(200.0) == pytest.approx(stokes_einstein(200.0, 0.35e-9, eta(200.0)))
    with pytest.raises(InputError):
        StokesEinsteinDiffusion(radius_m=0.0, viscosity=eta)


def test_table_models_interpolate_log_linearly():
    table = TableDiffusion(points=((100.0, 1e-3), (200.0, 1e-5)))
    assert table(150.0) == pytest.approx(1e-4 * 1e-4)
    assert table(100.0) == pytest.approx(1e-3 * 1e-4)
    outside = table.evaluate(250.0)
    assert outside.value == pytest.approx(1e-6 * 1e-4)
    assert not outside.in_range

    viscosity = TableViscosity(points=[(150.0, 1.0), (250.0, 0.01)])
    assert viscosity(200.0) == pytest.approx(0.1)

    concentration = TableConcentration(points=[(100.0, 5e22), (300.0, 4.5e22)])
    assert concentration.valid_range == (100.0, 300.0)
    assert 4.5e28 < concentration(200.0) < 5e28


def test_table_validation():
    with pytest.raises(InputError):
        TableDiffusion(points=((100.0, 1e-3),))
    with pytest.raises(InputError):
        TableDiffusion(points=((200.0, 1e-3), (100.0, 1e-4)))
    with pytest.raises(InputError):
        TableViscosity(points=((100.0, 1.0), (200.0, 0.0)))


def test_parametric_and_sum_diffusion():
    solute = ParametricDiffusion(D0_cm2_s=0.08, activation_K=2500.0, freeze_K=150.0, exponent=6.0)
    expected = 0.08 * np.exp(-2500.0 / 250.0) * np.exp(-(150.0 / 250.0) ** 6) * 1e-4
    assert solute(250.0) == pytest.approx(expected)

    total = SumDiffusion(terms=[solute, TolueneSelfDiffusion()])
    assert total(250.0) == pytest.approx(solute(250.0) + TolueneSelfDiffusion()(250.0))
    assert not total.evaluate(100.0).in_range

    with pytest.raises(InputError):
        ParametricDiffusion(D0_cm2_s=0.0, activation_K=1.0)
    with pytest.raises(InputError):
        SumDiffusion(terms=[])


def test_constant_concentration():
    model = ConstantConcentration(2.0e21)
    assert model(100.0) == pytest.approx(2.0e27)
    with pytest.raises(InputError):
        ConstantConcentration(-1.0)


def test_cs2_s2cl2_mole_fraction():
    """25% S2Cl2 by volume is about 20 mol%"""
    components = components_from_records(REFERENCE_MIXTURES['cs2_s2cl2'])
    fractions = mole_fractions(components)
    print(f"📊 S2Cl2 mole fraction: {fractions['S2Cl2']:.4f}")
    assert fractions['S2Cl2'] == pytest.approx(0.20, abs=0.01)
    assert sum(fractions.values()) == pytest.approx(1.0)


def test_cs2_s2cl2_chlorine_concentration():
    components = components_from_records(REFERENCE_MIXTURES['cs2_s2cl2'])
    c35 = mixture_concentration(components, get_species('35Cl'))
    c37 = mixture_concentration(components, get_species('37Cl'))
    assert c35 == pytest.approx(2.851e21, rel=2e-3)
    assert c35 + c37 == pytest.approx(3.764e21, rel=2e-3)
    assert mixture_concentration(components, get_species('1H')) == 0.0


def test_enriched_isotope_key_ignores_abundance():
    deuterated = MixtureComponent('toluene-d8', density=0.943, molar_mass=100.19,
                                  nuclei_per_molecule={'2H': 8, 'C': 7})
    natural = MixtureComponent('toluene', density=0.867, molar_mass=92.14,
                               nuclei_per_molecule={'H': 8, 'C': 7})
    assert deuterated.nuclei_count(get_species('2H')) == 8.0
    assert natural.nuclei_count(get_species('2H')) == pytest.approx(8 * get_species('2H').abundance)


def test_mixture_validation():
    with pytest.raises(InputError):
        mole_fractions([])
    with pytest.raises(InputError):
        mole_fractions([MixtureComponent('a', 1.0, 10.0, volume_fraction=0.5)])
    with pytest.raises(InputError):
        components_from_records([{'label': 'x', 'molar_mass_g_mol': 10.0}])
