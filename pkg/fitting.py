"""
Least-squares engines and the three fitting campaigns:
Arrhenius/Orbach extraction, joint diffusion-model fitting and echo-decay fitting.
"""

import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config import FIT_CONFIG, PHYSICS_CONFIG, HyperfineLine, Quantity
from echodecay import (
    DecayKind, MODEL_CLASSES, MonoDecay, decay_jacobian, evaluate_decay, model_from_parameters,
)
from exceptions import BracketError, DomainError, InputError, SingularFitError
from mechanisms import (
    DiffusionMechanism, OrbachChannel, rates_at_diffusion,
)
from physconst import CONSTANTS, NuclearSpecies, nearest_vibrational_mode
from solvent import ParametricDiffusion, TemperatureModel

logger = logging.getLogger(__name__)

ORBACH_FLOOR_REASON = 'measured rate at or below Orbach floor'


# === DATA TYPES ===

class RelaxationPoint(NamedTuple):
    T: float        # K
    time: float     # s
    sigma: float    # s


@dataclass
class RelaxationDataset:
    """Temperature-resolved T1 or T2 measurements, canonically sorted by temperature"""
    quantity: Quantity
    points: List[RelaxationPoint]
    label: str = ""
    hyperfine_line: Optional[HyperfineLine] = None

    def __post_init__(self):
        points = [RelaxationPoint(*p) for p in self.points]
        for i, p in enumerate(points):
            if not (p.T > 0 and p.time > 0 and p.sigma > 0):
                raise InputError(f"{self.label or 'dataset'} point {i}: T, time and sigma must be positive")
        # stable sort keeps duplicate temperatures in file order
        self.points = sorted(points, key=lambda p: p.T)

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([p.T for p in self.points])

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.points])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p.sigma for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


class EchoPoint(NamedTuple):
    tau: float          # s
    amplitude: float
    sigma: float


@dataclass
class EchoTrace:
    points: List[EchoPoint]
    label: str = ""

    def __post_init__(self):
        self.points = [EchoPoint(*p) for p in self.points]
        taus = [p.tau for p in self.points]
        if any(t < 0 for t in taus):
            raise InputError("Echo delays must be non-negative")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise InputError("Echo delays must be strictly increasing")
        if any(not p.sigma > 0 for p in self.points):
            raise InputError("Echo sigma values must be positive")

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.points])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p.sigma for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class FitOutcome:
    parameters: Dict[str, float]
    stderrs: Dict[str, float]
    chi2: float
    reduced_chi2: Optional[float]
    residuals: List[float]
    iterations: int
    converged: bool
    singular: bool = False
    chi2_history: List[float] = field(default_factory=list)
    message: str = ""
    excluded: List[Dict[str, Any]] = field(default_factory=list)
    derived: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'parameters': dict(self.parameters),
            'stderrs': dict(self.stderrs),
            'chi2': self.chi2,
            'reduced_chi2': self.reduced_chi2,
            'residuals': list(self.residuals),
            'iterations': self.iterations,
            'converged': self.converged,
            'singular': self.singular,
            'chi2_history': list(self.chi2_history),
            'message': self.message,
            'excluded': list(self.excluded),
            'derived': dict(self.derived),
            'warnings': list(self.warnings),
        }


@dataclass(frozen=True)
class ParameterSpec:
    initial: float
    lower: float = -math.inf
    upper: float = math.inf
    fixed: bool = False

    def __post_init__(self):
        if not self.lower <= self.initial <= self.upper:
            raise InputError(f"Initial value {self.initial} outside bounds [{self.lower}, {self.upper}]")


class DiffusionTarget(NamedTuple):
    dataset: RelaxationDataset
    species: NuclearSpecies
    concentration: TemperatureModel


@dataclass
class DiffusionFitSpec:
    targets: List[DiffusionTarget]
    solvent_diffusion: TemperatureModel
    orbach: OrbachChannel
    distance_nm: ParameterSpec
    solute: Dict[str, ParameterSpec] = field(default_factory=dict)
    mode: str = "parametric"
    d_grid_nm: List[float] = field(default_factory=list)
    B0: float = PHYSICS_CONFIG['field_B0_T']
    weighted: bool = FIT_CONFIG['weighted']
    stokes_einstein: Optional[TemperatureModel] = None
    extra_starts: List[Dict[str, float]] = field(default_factory=list)

    SOLUTE_PARAMETERS = ('D0_cm2_s', 'activation_K', 'freeze_K', 'exponent')

    def __post_init__(self):
        if not self.targets:
            raise InputError("Diffusion fit needs at least one dataset")
        if self.mode not in ('parametric', 'pointwise'):
            raise InputError(f"Unknown diffusion fit mode '{self.mode}'")
        if self.mode == 'parametric':
            missing = [name for name in ('D0_cm2_s', 'activation_K') if name not in self.solute]
            if missing:
                raise InputError(f"Parametric solute diffusion needs {', '.join(missing)}")
            unknown = [name for name in self.solute if name not in self.SOLUTE_PARAMETERS]
            if unknown:
                raise InputError(f"Unknown solute diffusion parameters: {', '.join(unknown)}")
        if any(not d > 0 for d in self.d_grid_nm):
            raise InputError("Distance grid values must be positive")


class LinearFitResult(NamedTuple):
    slope: float
    intercept: float
    stderr_slope: float
    stderr_intercept: float
    chi2: float
    residuals: np.ndarray


# === LINEAR ENGINE ===

def weighted_linear_fit(x: Sequence[float], y: Sequence[float], sigma: Sequence[float]) -> LinearFitResult:
    """Closed-form minimiser of sum(((y - a - b x) / sigma)^2)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (x.shape == y.shape == sigma.shape) or x.ndim != 1:
        raise InputError("x, y and sigma must be one-dimensional and of equal length")
    if len(x) < 2:
        raise InputError("Linear fit needs at least two points")
    if np.any(sigma <= 0):
        raise InputError("sigma values must be positive")
    if np.ptp(x) == 0:
        raise SingularFitError("All x values are equal; slope is undefined")

    w = 1.0 / sigma ** 2
    S = w.sum()
    x_mean = float(np.sum(w * x) / S)
    t = x - x_mean
    Stt = float(np.sum(w * t * t))
    if Stt <= 0:
        raise SingularFitError("Degenerate x values")
    slope = float(np.sum(w * t * y) / Stt)
    intercept = float((np.sum(w * y) - np.sum(w * x) * slope) / S)
    residuals = y - intercept - slope * x
    chi2 = float(np.sum(w * residuals ** 2))
    return LinearFitResult(
        slope=slope,
        intercept=intercept,
        stderr_slope=math.sqrt(1.0 / Stt),
        stderr_intercept=math.sqrt(1.0 / S + x_mean ** 2 / Stt),
        chi2=chi2,
        residuals=residuals,
    )


# === NONLINEAR ENGINE ===

Predictor = Callable[[Dict[str, float]], np.ndarray]
JacobianFn = Callable[[Dict[str, float]], np.ndarray]


def central_difference_jacobian(predict: Predictor, params: Dict[str, float], names: Sequence[str],
                                bounds: Mapping[str, Tuple[float, float]],
                                relative_step: float = FIT_CONFIG['fd_relative_step']) -> np.ndarray:
    """d predict / d params for `names`, one-sided next to a bound"""
    columns = []
    for name in names:
        value = params[name]
        h = relative_step * max(abs(value), 1e-12) if value != 0 else relative_step
        lo, hi = bounds.get(name, (-math.inf, math.inf))
        up = dict(params)
        down = dict(params)
        if value + h > hi:
            up[name], down[name], span = value, value - h, h
        elif value - h < lo:
            up[name], down[name], span = value + h, value, h
        else:
            up[name], down[name], span = value + h, value - h, 2.0 * h
        columns.append((np.asarray(predict(up), dtype=float) - np.asarray(predict(down), dtype=float)) / span)
    return np.column_stack(columns)


def _covariance(J_r: np.ndarray) -> Optional[np.ndarray]:
    A = J_r.T @ J_r
    if A.size == 0:
        return None
    try:
        if not np.all(np.isfinite(A)) or np.linalg.cond(A) > FIT_CONFIG['singular_condition']:
            return None
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return None


def nonlinear_least_squares(predict: Predictor, initial: Mapping[str, float], y: Sequence[float],
                            sigma: Optional[Sequence[float]] = None,
                            bounds: Optional[Mapping[str, Tuple[float, float]]] = None,
                            fixed: Sequence[str] = (),
                            jacobian: Optional[JacobianFn] = None,
                            scale_stderr: bool = True) -> FitOutcome:
    """
    Damped (Levenberg-Marquardt) least squares with projection onto bounds.

    `predict` maps a full parameter dict to model values matching `y`; `jacobian`,
    when given, returns d predict / d param with one column per parameter in the
    order of `initial`. Non-convergence is reported, never raised.
    """
    names = list(initial)
    bounds = dict(bounds or {})
    free = [name for name in names if name not in set(fixed)]
    y = np.asarray(y, dtype=float)
    sigma = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    if sigma.shape != y.shape:
        raise InputError("sigma must match the data length")
    if np.any(sigma <= 0):
        raise InputError("sigma values must be positive")
    if not free:
        raise InputError("No free parameters to fit")
    if len(y) < len(free):
        raise InputError(f"{len(y)} data points cannot determine {len(free)} free parameters")
    for name in names:
        lo, hi = bounds.get(name, (-math.inf, math.inf))
        if not lo <= initial[name] <= hi:
            raise InputError(f"Initial {name} = {initial[name]} outside bounds [{lo}, {hi}]")

    lower = np.array([bounds.get(n, (-math.inf, math.inf))[0] for n in free])
    upper = np.array([bounds.get(n, (-math.inf, math.inf))[1] for n in free])
    params = {name: float(initial[name]) for name in names}

    def with_free(vector: np.ndarray) -> Dict[str, float]:
        trial = dict(params)
        trial.update(zip(free, (float(v) for v in vector)))
        return trial

    def residuals(p: Dict[str, float]) -> Optional[np.ndarray]:
        try:
            model = np.asarray(predict(p), dtype=float)
        except (DomainError, InputError, OverflowError, ZeroDivisionError, FloatingPointError):
            return None
        r = (y - model) / sigma
        return r if np.all(np.isfinite(r)) else None

    def residual_jacobian(p: Dict[str, float]) -> np.ndarray:
        if jacobian is not None:
            full = np.asarray(jacobian(p), dtype=float)
            J = full[:, [names.index(n) for n in free]]
        else:
            J = central_difference_jacobian(predict, p, free, bounds)
        return -J / sigma[:, None]

    r = residuals(params)
    if r is None:
        raise InputError("Model cannot be evaluated at the initial parameters")
    chi2 = float(r @ r)
    history = [chi2]
    damping = FIT_CONFIG['initial_damping']
    converged = chi2 <= FIT_CONFIG['chi2_floor']
    message = "exact fit at initial parameters" if converged else ""
    iterations = 0

    while not converged and iterations < FIT_CONFIG['max_iterations']:
        iterations += 1
        p_vec = np.array([params[n] for n in free])
        J = residual_jacobian(params)
        A = J.T @ J
        g = J.T @ r
        scale = np.diag(A).copy()
        scale[scale <= 0] = 1.0

        accepted = False
        while damping <= FIT_CONFIG['max_damping']:
            try:
                step = np.linalg.solve(A + damping * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                damping *= FIT_CONFIG['damping_increase']
                continue
            trial_vec = np.clip(p_vec + step, lower, upper)
            actual_step = trial_vec - p_vec
            step_rel = float(np.max(np.abs(actual_step) / np.maximum(np.abs(p_vec), 1e-300)))
            trial = with_free(trial_vec)
            r_trial = residuals(trial)
            chi2_trial = float(r_trial @ r_trial) if r_trial is not None else math.inf

            if chi2_trial <= chi2:
                change = (chi2 - chi2_trial) / max(chi2, 1e-300)
                params, r, chi2 = trial, r_trial, chi2_trial
                history.append(chi2)
                damping = max(damping / FIT_CONFIG['damping_decrease'], 1e-15)
                accepted = True
                if chi2 <= FIT_CONFIG['chi2_floor']:
                    converged, message = True, "chi2 reached numerical floor"
                elif change < FIT_CONFIG['chi2_rtol']:
                    converged, message = True, "relative chi2 change below tolerance"
                elif step_rel < FIT_CONFIG['step_rtol']:
                    converged, message = True, "step below tolerance"
                break
            if step_rel < FIT_CONFIG['step_rtol']:
                converged, message = True, "no further reduction possible at step tolerance"
                break
            damping *= FIT_CONFIG['damping_increase']

        if not accepted and not converged:
            message = "damping limit reached without reducing chi2"
            break

    if not converged and not message:
        message = f"iteration cap {FIT_CONFIG['max_iterations']} reached"

    dof = len(y) - len(free)
    reduced = chi2 / dof if dof > 0 else None
    cov = _covariance(residual_jacobian(params))
    stderrs: Dict[str, float] = {}
    if cov is not None:
        factor = reduced if (scale_stderr and reduced is not None) else 1.0
        stderrs = {name: float(math.sqrt(max(cov[i, i] * factor, 0.0))) for i, name in enumerate(free)}
        stderrs.update({name: 0.0 for name in names if name not in free})

    model = np.asarray(predict(params), dtype=float)
    if converged:
        logger.debug(f"✅ Least squares converged in {iterations} iterations ({message})")
    else:
        logger.warning(f"⚠️ Least squares did not converge: {message}")

    return FitOutcome(
        parameters=dict(params),
        stderrs=stderrs,
        chi2=chi2,
        reduced_chi2=reduced,
        residuals=[float(v) for v in (y - model)],
        iterations=iterations,
        converged=converged,
        singular=cov is None,
        chi2_history=history,
        message=message,
    )


def multi_start(fit: Callable[[Mapping[str, float]], FitOutcome],
                starts: Sequence[Mapping[str, float]]) -> FitOutcome:
    """Best converged outcome (lowest chi2) over several initial points"""
    outcomes = [fit(start) for start in starts]
    pool = [o for o in outcomes if o.converged] or outcomes
    return min(pool, key=lambda o: o.chi2)


# === ORBACH CAMPAIGN ===

def fit_orbach(dataset: RelaxationDataset, weighted: bool = FIT_CONFIG['weighted']) -> FitOutcome:
    """Arrhenius fit of ln(1/T1) against 1/T; delta in meV, A in 1/s"""
    if dataset.quantity != Quantity.T1:
        raise InputError(f"Orbach fit needs T1 data, got {dataset.quantity.value}")
    if len(dataset) < FIT_CONFIG['min_orbach_points']:
        raise InputError(f"Orbach fit needs at least {FIT_CONFIG['min_orbach_points']} points, got {len(dataset)}")

    times = dataset.times
    x = 1.0 / dataset.temperatures
    y = -np.log(times)
    sigma_y = dataset.sigmas / times if weighted else np.ones_like(y)
    line = weighted_linear_fit(x, y, sigma_y)

    n = len(dataset)
    reduced = line.chi2 / (n - 2) if n > 2 else None
    factor = math.sqrt(reduced) if reduced is not None else 1.0

    kB_meV = CONSTANTS.kB / CONSTANTS.J_per_meV
    delta = -line.slope * kB_meV
    A = math.exp(line.intercept)
    stderr_delta = line.stderr_slope * kB_meV * factor
    stderr_A = A * line.stderr_intercept * factor
    mode, mode_meV, offset = nearest_vibrational_mode(delta)

    outcome = FitOutcome(
        parameters={'A_per_s': A, 'delta_meV': delta},
        stderrs={'A_per_s': stderr_A, 'delta_meV': stderr_delta},
        chi2=line.chi2,
        reduced_chi2=reduced,
        residuals=[float(v) for v in line.residuals],
        iterations=1,
        converged=True,
        chi2_history=[line.chi2],
        message="closed-form linear fit of ln(1/T1) against 1/T",
        derived={
            'slope_K': line.slope,
            'intercept': line.intercept,
            'nearest_mode': mode,
            'nearest_mode_meV': mode_meV,
            'mode_offset_meV': offset,
        },
    )
    logger.info(f"✅ Orbach fit: delta = {delta:.3f} +/- {stderr_delta:.3f} meV (nearest mode {mode})")
    return outcome


# === RATE INVERSION ===

def _rate(mech: DiffusionMechanism, T: float, D: float, quantity: Quantity) -> float:
    rates = rates_at_diffusion(mech, T, D)
    return rates.R2 if quantity == Quantity.T2 else rates.R1


def invert_rate_for_D(target_R2: float, mech: DiffusionMechanism, T: float,
                      bracket: Optional[Tuple[float, float]] = None) -> float:
    """Total diffusion coefficient (m^2/s) whose diffusion-mechanism R2 equals target_R2"""
    D_lo, D_hi = bracket or FIT_CONFIG['diffusion_bracket_m2_s']
    if not 0 < D_lo < D_hi:
        raise InputError(f"Bracket must satisfy 0 < D_lo < D_hi, got ({D_lo}, {D_hi})")
    R_lo = _rate(mech, T, D_lo, Quantity.T2)
    R_hi = _rate(mech, T, D_hi, Quantity.T2)
    if not R_lo >= target_R2 >= R_hi:
        raise BracketError(f"Target rate {target_R2:.6g} 1/s at {T} K not reachable", (R_hi, R_lo))

    rtol = FIT_CONFIG['bisection_rtol']
    for _ in range(FIT_CONFIG['bisection_max_iterations']):
        if D_hi / D_lo - 1.0 <= rtol:
            break
        mid = math.sqrt(D_lo * D_hi)
        if _rate(mech, T, mid, Quantity.T2) > target_R2:
            D_lo = mid
        else:
            D_hi = mid
    return math.sqrt(D_lo * D_hi)


# === DIFFUSION CAMPAIGN ===

def _solute_model(params: Mapping[str, float]) -> ParametricDiffusion:
    return ParametricDiffusion(
        D0_cm2_s=params['D0_cm2_s'],
        activation_K=params['activation_K'],
        freeze_K=params.get('freeze_K', 0.0),
        exponent=params.get('exponent', 6.0),
    )


def _mechanism(spec: DiffusionFitSpec, target: DiffusionTarget, d_nm: float,
               solute: TemperatureModel) -> DiffusionMechanism:
    return DiffusionMechanism(
        d=d_nm * CONSTANTS.m_per_nm,
        species=target.species,
        concentration=target.concentration,
        solvent_diffusion=spec.solvent_diffusion,
        solute_diffusion=solute,
        B0=spec.B0,
    )


def _predicted_times(spec: DiffusionFitSpec, params: Mapping[str, float],
                     kept: Sequence[Tuple[DiffusionTarget, Sequence[RelaxationPoint]]]) -> np.ndarray:
    solute = _solute_model(params)
    predictions = []
    for target, points in kept:
        mech = _mechanism(spec, target, params['d_nm'], solute)
        for point in points:
            D = mech.total_diffusion(point.T).value
            diffusion = rates_at_diffusion(mech, point.T, D)
            orbach = spec.orbach.rates(point.T)
            rate = (diffusion.R2 + orbach.R2) if target.dataset.quantity == Quantity.T2 else (diffusion.R1 + orbach.R1)
            predictions.append(1.0 / rate)
    return np.array(predictions)


def _excess_rate(spec: DiffusionFitSpec, quantity: Quantity, point: RelaxationPoint) -> float:
    """Measured rate minus the Orbach contribution; <= 0 means at or below the Orbach floor"""
    orbach = spec.orbach.rates(point.T)
    return 1.0 / point.time - (orbach.R2 if quantity == Quantity.T2 else orbach.R1)


def _split_orbach_floor(spec: DiffusionFitSpec) -> Tuple[List[Tuple[DiffusionTarget, List[RelaxationPoint]]],
                                                         List[Dict[str, Any]]]:
    """Points left for the diffusion mechanism, and the excluded ones"""
    kept, excluded = [], []
    for target in spec.targets:
        points = []
        for point in target.dataset.points:
            if _excess_rate(spec, target.dataset.quantity, point) <= 0:
                excluded.append({'dataset': target.dataset.label, 'T_K': point.T, 'reason': ORBACH_FLOOR_REASON})
            else:
                points.append(point)
        kept.append((target, points))
    return kept, excluded


def _diffusion_table(spec: DiffusionFitSpec, solute: TemperatureModel) -> List[Dict[str, float]]:
    temps = sorted({p.T for t in spec.targets for p in t.dataset.points})
    rows = []
    for T in temps:
        D_solute = solute(T)
        D_solvent = spec.solvent_diffusion(T)
        row = {
            'T_K': T,
            'D_solute_cm2_s': D_solute / CONSTANTS.m2_s_per_cm2_s,
            'D_solvent_cm2_s': D_solvent / CONSTANTS.m2_s_per_cm2_s,
            'D_total_cm2_s': (D_solute + D_solvent) / CONSTANTS.m2_s_per_cm2_s,
        }
        if spec.stokes_einstein is not None:
            try:
                row['solute_to_stokes_einstein'] = D_solute / spec.stokes_einstein(T)
            except DomainError:
                pass
        rows.append(row)
    return rows


def _range_warnings(spec: DiffusionFitSpec) -> List[str]:
    warnings = []
    for target in spec.targets:
        for point in target.dataset.points:
            if not (target.concentration.evaluate(point.T).in_range
                    and spec.solvent_diffusion.evaluate(point.T).in_range):
                warnings.append(f"{target.dataset.label or 'dataset'}: {point.T} K outside solvent model validity range")
    return warnings


def _fit_diffusion_parametric(spec: DiffusionFitSpec) -> FitOutcome:
    initial = {'d_nm': spec.distance_nm.initial}
    bounds = {'d_nm': (spec.distance_nm.lower, spec.distance_nm.upper)}
    fixed = ['d_nm'] if spec.distance_nm.fixed else []
    for name, p in spec.solute.items():
        initial[name] = p.initial
        bounds[name] = (p.lower, p.upper)
        if p.fixed:
            fixed.append(name)

    kept, excluded = _split_orbach_floor(spec)
    y = np.array([p.time for _, points in kept for p in points])
    sigma = np.array([p.sigma for _, points in kept for p in points]) if spec.weighted else None

    def run(start: Mapping[str, float]) -> FitOutcome:
        merged = dict(initial)
        merged.update({k: v for k, v in start.items() if k in merged})
        return nonlinear_least_squares(lambda p: _predicted_times(spec, p, kept), merged, y, sigma,
                                       bounds=bounds, fixed=fixed, scale_stderr=True)

    outcome = multi_start(run, [initial] + list(spec.extra_starts))
    outcome.excluded = excluded
    outcome.derived['diffusion_table'] = _diffusion_table(spec, _solute_model(outcome.parameters))
    outcome.derived['d_nm'] = outcome.parameters['d_nm']
    outcome.warnings.extend(f"{e['dataset']} {e['T_K']} K excluded: {e['reason']}" for e in excluded)
    outcome.warnings.extend(_range_warnings(spec))
    return outcome


def _recover_pointwise(spec: DiffusionFitSpec, d_nm: float) -> Dict[str, Any]:
    """Invert every excess T2 rate for the total D at one trial distance"""
    curves: List[List[Tuple[float, float]]] = []
    excluded: List[Dict[str, Any]] = []
    for target in spec.targets:
        # rates are evaluated at an explicit D, the solute slot is never read
        mech = _mechanism(spec, target, d_nm, spec.solvent_diffusion)
        curve = []
        for point in target.dataset.points:
            excess = _excess_rate(spec, Quantity.T2, point)
            entry = {'dataset': target.dataset.label, 'T_K': point.T}
            if excess <= 0:
                excluded.append({**entry, 'reason': ORBACH_FLOOR_REASON})
                continue
            try:
                curve.append((point.T, invert_rate_for_D(excess, mech, point.T)))
            except BracketError as e:
                excluded.append({**entry, 'reason': str(e)})
        curves.append(curve)

    residuals: List[float] = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            a, b = curves[i], curves[j]
            if len(b) < 2 or not a:
                continue
            b_T = np.array([t for t, _ in b])
            b_logD = np.log([D for _, D in b])
            for T, D in a:
                if b_T[0] <= T <= b_T[-1]:
                    residuals.append(float(math.log(D) - np.interp(T, b_T, b_logD)))
    n_points = sum(len(t.dataset.points) for t in spec.targets)
    if residuals:
        inconsistency = float(np.mean(np.square(residuals)))
    elif len(curves) > 1:
        # no overlapping recovered curves, nothing to compare
        inconsistency = math.inf
    else:
        inconsistency = 0.0
    if n_points:
        inconsistency += FIT_CONFIG['exclusion_penalty'] * len(excluded) / n_points
    return {'d_nm': d_nm, 'curves': curves, 'excluded': excluded,
            'residuals': residuals, 'inconsistency': inconsistency}


async def scan_distance_grid(spec: DiffusionFitSpec, grid: Sequence[float]) -> List[Dict[str, Any]]:
    """Evaluate every trial distance concurrently; results keep grid order"""
    semaphore = asyncio.Semaphore(max(1, FIT_CONFIG['grid_workers']))

    async def evaluate(d_nm: float) -> Dict[str, Any]:
        async with semaphore:
            return await asyncio.to_thread(_recover_pointwise, spec, d_nm)

    return list(await asyncio.gather(*(evaluate(d) for d in grid)))


def _scan_grid(spec: DiffusionFitSpec, grid: Sequence[float]) -> List[Dict[str, Any]]:
    """Synchronous grid scan; falls back to a thread pool when called from inside an event loop"""
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(scan_distance_grid(spec, grid))
    with ThreadPoolExecutor(max_workers=max(1, FIT_CONFIG['grid_workers'])) as pool:
        return list(pool.map(lambda d: _recover_pointwise(spec, d), grid))


def _fit_diffusion_pointwise(spec: DiffusionFitSpec) -> FitOutcome:
    if any(t.dataset.quantity != Quantity.T2 for t in spec.targets):
        raise InputError("Pointwise diffusion recovery inverts T2 rates; every dataset must be T2")

    warnings = _range_warnings(spec)
    grid = list(spec.d_grid_nm) or [spec.distance_nm.initial]
    if len(spec.targets) < 2 and len(grid) > 1:
        warnings.append("single dataset: no cross-isotope consistency, using initial distance")
        grid = [spec.distance_nm.initial]

    scans = _scan_grid(spec, grid)
    best = min(scans, key=lambda s: s['inconsistency'])
    converged = len(spec.targets) < 2 or any(s['residuals'] for s in scans)
    if not converged:
        warnings.append("no grid distance gave overlapping recovered curves; distance is undetermined")

    table = []
    for target, curve in zip(spec.targets, best['curves']):
        for T, D_total in curve:
            D_solvent = spec.solvent_diffusion(T)
            row = {
                'dataset': target.dataset.label,
                'T_K': T,
                'D_total_cm2_s': D_total / CONSTANTS.m2_s_per_cm2_s,
                'D_solvent_cm2_s': D_solvent / CONSTANTS.m2_s_per_cm2_s,
                'D_solute_cm2_s': (D_total - D_solvent) / CONSTANTS.m2_s_per_cm2_s,
            }
            if D_total <= D_solvent:
                warnings.append(f"{target.dataset.label} {T} K: recovered D below solvent self-diffusion")
            if spec.stokes_einstein is not None and D_total > D_solvent:
                try:
                    row['solute_to_stokes_einstein'] = (D_total - D_solvent) / spec.stokes_einstein(T)
                except DomainError:
                    pass
            table.append(row)

    n_res = len(best['residuals'])
    logger.info(f"✅ Pointwise diffusion recovery: best d = {best['d_nm']:.4g} nm over {len(grid)} grid points")
    return FitOutcome(
        parameters={'d_nm': best['d_nm']},
        stderrs={},
        chi2=best['inconsistency'],
        reduced_chi2=best['inconsistency'] / n_res if n_res else None,
        residuals=list(best['residuals']),
        iterations=len(grid),
        converged=converged,
        singular=True,
        chi2_history=[s['inconsistency'] for s in scans],
        message="pointwise inversion of excess T2 rates; d chosen by cross-dataset consistency",
        excluded=best['excluded'],
        derived={
            'd_nm': best['d_nm'],
            'grid_scan': [{'d_nm': s['d_nm'], 'inconsistency': s['inconsistency']} for s in scans],
            'diffusion_table': table,
        },
        warnings=warnings,
    )


def fit_diffusion(spec: DiffusionFitSpec) -> FitOutcome:
    """Joint translational-diffusion fit with the Orbach channel held fixed"""
    logger.info(f"🔬 Diffusion fit ({spec.mode}) over {len(spec.targets)} dataset(s)")
    if spec.mode == 'pointwise':
        return _fit_diffusion_pointwise(spec)
    return _fit_diffusion_parametric(spec)


# === ECHO CAMPAIGN ===

def _mono_prefit(trace: EchoTrace) -> Tuple[float, float]:
    """(A, T2) from a log-linear fit of the leading amplitudes above 5% of the maximum"""
    taus = trace.taus
    amps = trace.amplitudes
    above = amps > 0.05 * max(float(np.max(amps)), 0.0)
    leading = int(np.argmin(above)) if not above.all() else len(amps)
    if leading >= 2 and np.ptp(taus[:leading]) > 0:
        head = amps[:leading]
        line = weighted_linear_fit(2.0 * taus[:leading], np.log(head), trace.sigmas[:leading] / head)
        if line.slope < 0:
            return math.exp(line.intercept), -1.0 / line.slope
    A = float(np.max(np.abs(amps))) or 1.0
    return A, float(max(taus[-1], 1e-12))


def _dominant_angular_frequency(taus: np.ndarray, values: np.ndarray) -> float:
    """Strongest frequency with at least three periods in the window, rad/s"""
    n = max(len(taus), 8)
    grid = np.linspace(taus[0], taus[-1], n)
    resampled = np.interp(grid, taus, values)
    spectrum = np.abs(np.fft.rfft(resampled - resampled.mean()))
    freqs = np.fft.rfftfreq(n, d=grid[1] - grid[0])
    if len(spectrum) < 4:
        return 0.0
    peak = 3 + int(np.argmax(spectrum[3:]))
    return 2.0 * math.pi * float(freqs[peak])


def fit_echo(trace: EchoTrace, kind: DecayKind, weighted: bool = FIT_CONFIG['weighted'],
             fixed: Optional[Mapping[str, float]] = None) -> FitOutcome:
    """Fit an echo-decay model; `fixed` pins parameters (e.g. n = 9/8)"""
    fixed = dict(fixed or {})
    n_params = len(MODEL_CLASSES[kind].parameter_names)
    unknown = sorted(set(fixed) - set(MODEL_CLASSES[kind].parameter_names))
    if unknown:
        raise InputError(f"Unknown {kind.value} parameter(s): {', '.join(unknown)}")
    free_count = n_params - len(fixed)
    if len(trace) < 2 + free_count:
        raise InputError(f"Echo fit of {kind.value} needs at least {2 + free_count} points, got {len(trace)}")

    taus = trace.taus
    y = trace.amplitudes
    sigma = trace.sigmas if weighted else None
    A0, T2_0 = _mono_prefit(trace)
    tiny = 1e-15

    if kind == DecayKind.MODULATED_BI:
        mono = fit_echo(trace, DecayKind.MONO, weighted)
        A0, T2_0 = mono.parameters['A'], mono.parameters['T2']
        residual = y - evaluate_decay(MonoDecay(A0, T2_0), taus)
        omega0 = _dominant_angular_frequency(taus, residual)
        initial = {'A_inner': 0.5 * A0, 'T2_inner': T2_0, 'A_outer': 0.5 * A0,
                   'T2_outer': 0.5 * T2_0, 'omega_mod': max(omega0, tiny), 'phase': 0.0}
        bounds = {'A_inner': (0.0, math.inf), 'T2_inner': (tiny, math.inf), 'A_outer': (0.0, math.inf),
                  'T2_outer': (tiny, math.inf), 'omega_mod': (0.0, math.inf), 'phase': (-math.pi, math.pi)}
    elif kind == DecayKind.STRETCHED:
        initial = {'A': A0, 'T2': T2_0, 'n': 1.5}
        bounds = {'A': (0.0, math.inf), 'T2': (tiny, math.inf), 'n': (1.0, 3.0)}
    else:
        initial = {'A': A0, 'T2': T2_0}
        bounds = {'A': (0.0, math.inf), 'T2': (tiny, math.inf)}
    initial.update(fixed)

    def predict(p: Dict[str, float]) -> np.ndarray:
        return evaluate_decay(model_from_parameters(kind, p), taus)

    jacobian = None
    if kind in (DecayKind.MONO, DecayKind.STRETCHED):
        jacobian = lambda p: decay_jacobian(model_from_parameters(kind, p), taus)

    outcome = nonlinear_least_squares(predict, initial, y, sigma, bounds=bounds,
                                      fixed=list(fixed), jacobian=jacobian)
    T2_key = 'T2' if kind != DecayKind.MODULATED_BI else 'T2_inner'
    outcome.derived['kind'] = kind.value
    outcome.derived['T2_us'] = outcome.parameters[T2_key] / CONSTANTS.s_per_us
    return outcome
