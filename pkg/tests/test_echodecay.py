#!/usr/bin/env python3
"""
Test script to verify echo-decay models and the spectral-diffusion regime analysis
"""

import math

import numpy as np
import pytest

from echodecay import (
    DecayKind, ModulatedBiDecay, MonoDecay, Regime, StretchedDecay, classify_regime,
    concentration_criterion, crossover_diffusion, decay_jacobian, evaluate_decay,
    infer_diffusion_ratio, model_from_parameters, scaling_exponent,
)
from exceptions import DomainError, InputError
from physconst import get_species

CM2 = 1e-4   # m^2/s per cm^2/s
D_CUT = 0.35e-9


def test_mono_decay():
    model = MonoDecay(A=2.0, T2=230e-6)
    assert evaluate_decay(model, 0.0) == 2.0
    assert evaluate_decay(model, 115e-6) == pytest.approx(2.0 * math.exp(-1.0))
    values = evaluate_decay(model, np.linspace(0.0, 1e-3, 11))
    assert values.shape == (11,)
    assert np.all(np.diff(values) < 0)


def test_stretched_reduces_to_mono_at_n_one():
    taus = np.linspace(0.0, 600e-6, 50)
    mono = evaluate_decay(MonoDecay(1.0, 230e-6), taus)
    stretched = evaluate_decay(StretchedDecay(1.0, 230e-6, 1.0), taus)
    np.testing.assert_allclose(stretched, mono, rtol=1e-12)


def test_modulated_decay_at_zero_delay():
    model = ModulatedBiDecay(A_inner=0.6, T2_inner=230e-6, A_outer=0.4, T2_outer=1e-6,
                             omega_mod=2 * math.pi * 2e6, phase=math.pi / 3)
    assert evaluate_decay(model, 0.0) == pytest.approx(0.6 + 0.4 * 0.5)
    # outer transition has long gone after many outer T2
    assert evaluate_decay(model, 50e-6) == pytest.approx(0.6 * math.exp(-100e-6 / 230e-6), rel=1e-9)


def test_decay_model_validation():
    with pytest.raises(InputError):
        StretchedDecay(1.0, 230e-6, 0.5)
    with pytest.raises(InputError):
        MonoDecay(1.0, 0.0)
    with pytest.raises(InputError):
        ModulatedBiDecay(-1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        evaluate_decay(MonoDecay(1.0, 1e-6), -1e-9)


def test_model_from_parameters():
    model = model_from_parameters(DecayKind.STRETCHED, {'A': 1.0, 'T2': 2e-4, 'n': 1.125, 'extra': 5.0})
    assert isinstance(model, StretchedDecay)
    assert model.n == 1.125
    with pytest.raises(KeyError):
        model_from_parameters(DecayKind.MONO, {'A': 1.0})


def test_stretched_jacobian_matches_finite_differences():
    model = StretchedDecay(A=0.8, T2=230e-6, n=1.3)
    taus = np.linspace(0.0, 500e-6, 40)
    J = decay_jacobian(model, taus)
    assert J.shape == (40, 3)
    base = {'A': model.A, 'T2': model.T2, 'n': model.n}
    for column, name in enumerate(StretchedDecay.parameter_names):
        h = 1e-6 * base[name]
        up = evaluate_decay(StretchedDecay(**{**base, name: base[name] + h}), taus)
        down = evaluate_decay(StretchedDecay(**{**base, name: base[name] - h}), taus)
        np.testing.assert_allclose(J[:, column], (up - down) / (2 * h), rtol=1e-5, atol=1e-9)


def test_crossover_diffusion_for_chlorine():
    """D_min for 35Cl at 0.35 nm is of order 1e-10 cm^2/s"""
    D_min = crossover_diffusion(get_species('35Cl'), D_CUT) / CM2
    print(f"🧊 D_min(35Cl) = {D_min:.4g} cm^2/s")
    assert D_min == pytest.approx(1.392e-10, rel=2e-3)
    assert 0.5e-10 <= D_min <= 2e-10
    with pytest.raises(DomainError):
        crossover_diffusion(get_species('35Cl'), 0.0)


def test_regime_classification():
    D_min = crossover_diffusion(get_species('35Cl'), D_CUT)
    slow = classify_regime(5e-16 * CM2, D_min, 0.05)
    assert slow.regime == Regime.SLOW_DIFFUSION
    assert slow.dominant_exponent == pytest.approx(9.0 / 8.0)

    fast = classify_regime(1e-9 * CM2, D_min, 0.05)
    assert fast.regime == Regime.FAST_DIFFUSION
    assert fast.dominant_exponent == 1.0

    rigid = classify_regime(0.0, D_min, 0.05)
    assert rigid.regime == Regime.RIGID
    assert (rigid.dominant_exponent, rigid.exponent_upper) == (2.0, 3.0)

    assert classify_regime(D_min, D_min, 0.05).regime == Regime.FAST_DIFFUSION
    assert classify_regime(1e-30, D_min, 0.05).regime == Regime.RIGID


def test_regime_report_dictionary():
    report = classify_regime(5e-20, 1.4e-14, 0.5)
    data = report.as_dict()
    assert data['regime'] == 'slow_diffusion'
    assert data['low_concentration'] is False
    assert set(data) == {'D_m2_s', 'D_min_m2_s', 'c_d3', 'regime', 'dominant_exponent',
                         'exponent_upper', 'low_concentration'}


def test_concentration_criterion():
    c_d3, dilute = concentration_criterion(1e27, 1e-9)
    assert c_d3 == pytest.approx(1.0)
    assert not dilute
    assert concentration_criterion(1e25, 1e-9)[1]


def test_scaling_exponent_from_endpoints():
    """230 us at 1e-15 cm^2/s and 20 us at 1e-10 cm^2/s give T2 ~ D^-0.2"""
    p, stderr = scaling_exponent([230.0, 20.0], [1e-15, 1e-10])
    assert p == pytest.approx(0.212, abs=0.005)
    assert stderr == 0.0


def test_scaling_exponent_exact_power_law():
    D = np.logspace(-16, -10, 9)
    T2 = 3.0 * D ** -0.36
    p, stderr = scaling_exponent(T2, D)
    assert p == pytest.approx(0.36, abs=1e-6)
    assert stderr < 1e-6


def test_scaling_exponent_validation():
    with pytest.raises(InputError):
        scaling_exponent([1.0], [1.0])
    with pytest.raises(InputError):
        scaling_exponent([1.0, 2.0], [1.0, 1.0])
    with pytest.raises(InputError):
        scaling_exponent([1.0, -2.0], [1.0, 2.0])


def test_infer_diffusion_ratio_inverts_scaling():
    p, _ = scaling_exponent([230.0, 20.0], [1e-15, 1e-10])
    assert infer_diffusion_ratio(230.0, 20.0, p) == pytest.approx(1e5, rel=1e-9)
    with pytest.raises(DomainError):
        infer_diffusion_ratio(230.0, 20.0, 0.0)
