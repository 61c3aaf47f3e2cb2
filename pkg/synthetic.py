"""
Synthetic relaxation series and echo traces from the forward models
"""

import logging
from typing import Optional, Sequence

import numpy as np

from config import Quantity
from echodecay import EchoDecayModel, evaluate_decay
from exceptions import InputError
from fitting import EchoPoint, EchoTrace, RelaxationDataset, RelaxationPoint
from mechanisms import RelaxationChannel, predict_times

logger = logging.getLogger(__name__)


def _generator(noise: float, seed: Optional[int]) -> np.random.Generator:
    if noise < 0:
        raise InputError(f"Noise level must be non-negative, got {noise}")
    if noise > 0 and seed is None:
        raise InputError("A random seed is required when noise > 0")
    return np.random.default_rng(seed)


def simulate_relaxation(channels: Sequence[RelaxationChannel], temperatures: Sequence[float],
                        quantity: Quantity, noise: float = 0.0, seed: Optional[int] = None,
                        label: str = "synthetic") -> RelaxationDataset:
    """Forward-model T1 or T2 with multiplicative Gaussian noise; sigma = noise * time"""
    rng = _generator(noise, seed)
    times = [p.T1 if quantity == Quantity.T1 else p.T2 for p in predict_times(channels, temperatures)]
    if not all(np.isfinite(times)):
        raise InputError("Forward model gives an infinite time; add a channel with a non-zero rate")
    times = np.asarray(times)
    noisy = times * (1.0 + noise * rng.standard_normal(len(times))) if noise > 0 else times
    if np.any(noisy <= 0):
        raise InputError("Noise level too large: a simulated time is not positive")
    # noiseless series still need a positive sigma for weighting
    sigma = np.maximum(noise, 1e-3) * times
    logger.info(f"🧪 Simulated {len(times)} {quantity.value} points (noise {noise:g}, seed {seed})")
    return RelaxationDataset(
        quantity=quantity,
        points=[RelaxationPoint(float(T), float(t), float(s)) for T, t, s in zip(temperatures, noisy, sigma)],
        label=label,
    )


def simulate_echo(model: EchoDecayModel, taus: Sequence[float], noise: float = 0.0,
                  seed: Optional[int] = None, label: str = "synthetic") -> EchoTrace:
    """Echo trace with additive Gaussian noise of noise * max|V|"""
    rng = _generator(noise, seed)
    taus = np.asarray(taus, dtype=float)
    clean = np.atleast_1d(evaluate_decay(model, taus))
    scale = float(np.max(np.abs(clean))) or 1.0
    noisy = clean + noise * scale * rng.standard_normal(len(clean)) if noise > 0 else clean
    sigma = np.full_like(clean, max(noise, 1e-3) * scale)
    logger.info(f"🧪 Simulated echo trace of {len(taus)} points (noise {noise:g}, seed {seed})")
    return EchoTrace(points=[EchoPoint(float(t), float(v), float(s)) for t, v, s in zip(taus, noisy, sigma)],
                     label=label)
