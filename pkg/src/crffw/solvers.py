"""First-order MAP inference solvers over the product of simplices.

The core loop is generalized Frank-Wolfe: at each iteration a direction
point p is obtained by minimizing a linearization of the energy plus a
convex term, and the iterate moves by a convex combination

    x <- x + alpha_k * (p - x).

Direction oracles:

    vanilla:    p = per-node argmin vertex of the gradient
    l2:         p = Pi_X(-(Px + u) / lam)
    entropic:   p = softmax(-(Px + u) / lam)
    pgd:        p = Pi_X(x - (Px + u))

Entropic directions with lam = 1 and unit stepsize reproduce parallel
mean-field updates exactly.  The module also implements the remaining
comparison methods (FISTA-style accelerated projections, multiplicative
entropy updates, and a two-block splitting scheme) which do not fit the
direction/stepsize template.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import diagnostics, schedules
from .errors import Diverged
from .model import CrfInstance, DiagonalShift
from .regularizers import (EntropyRegularizer, L2Regularizer,
                           regularizer_value, strong_convexity)
from .simplex import project_feasible, round_nearest, softmax_rows

_BOUND_TOL = 1e-7


# ---------------------------------------------------------------------------
# method and config types

@dataclass(frozen=True)
class VanillaFW:
    name = "fw"


@dataclass(frozen=True)
class ConvexFW:
    name = "cfw"


@dataclass(frozen=True)
class L2FW:
    name = "l2fw"


@dataclass(frozen=True)
class EntropicFW:
    name = "efw"


@dataclass(frozen=True)
class MeanField:
    name = "mf"


@dataclass(frozen=True)
class DampedMeanField:
    alpha: float = 0.5
    name = "dmf"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("damping factor must lie in (0, 1]")


@dataclass(frozen=True)
class PGD:
    name = "pgd"


@dataclass(frozen=True)
class FastPGM:
    name = "pgm"


@dataclass(frozen=True)
class EMD:
    name = "emd"


@dataclass(frozen=True)
class ADMM:
    rho: float = 1.0
    name = "admm"

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("penalty parameter rho must be > 0")


SolverMethod = (VanillaFW | ConvexFW | L2FW | EntropicFW | MeanField
                | DampedMeanField | PGD | FastPGM | EMD | ADMM)

_NO_REG_METHODS = (VanillaFW, ConvexFW, PGD, FastPGM, EMD, ADMM)


@dataclass
class SolverConfig:
    method: SolverMethod
    regularizer: object = None
    schedule: object = None
    max_iters: int = 20
    record_discrete_energy: bool = True
    decrease_bound_check: bool = False
    record_iterates: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if isinstance(self.method, _NO_REG_METHODS):
            self.regularizer = None
        elif isinstance(self.method, (MeanField, DampedMeanField)):
            self.regularizer = EntropyRegularizer(1.0)
            alpha = self.method.alpha if isinstance(self.method, DampedMeanField) else 1.0
            self.schedule = schedules.Constant(alpha)
        elif isinstance(self.method, L2FW):
            if not isinstance(self.regularizer, L2Regularizer):
                raise ValueError("l2 Frank-Wolfe requires an L2Regularizer")
        elif isinstance(self.method, EntropicFW):
            if not isinstance(self.regularizer, EntropyRegularizer):
                raise ValueError("entropic Frank-Wolfe requires an EntropyRegularizer")
        if self.schedule is None:
            self.schedule = schedules.Constant(1.0)


# ---------------------------------------------------------------------------
# trace types

@dataclass
class IterationRecord:
    k: int
    alpha: float
    e_cont: float
    e_reg: float
    e_disc: float
    s_k: float
    step_norm: float
    bound_delta: float
    bound_held: Optional[bool]
    time_ms: float


CSV_COLUMNS = ("k", "alpha", "e_cont", "e_reg", "e_disc", "s_k",
               "step_norm", "bound_delta", "bound_held", "time_ms")


@dataclass
class IterationTrace:
    """Per-iteration solver history.

    Row k describes update k: the optimality measure and stepsize are
    evaluated at the point the update started from, and the energies at
    the point it produced.  The energies of the starting point are kept
    in the initial_* fields.
    """

    method: str
    initial_e_cont: float = math.nan
    initial_e_reg: float = math.nan
    initial_e_disc: float = math.nan
    records: list = field(default_factory=list)
    iterates: Optional[list] = None

    def __len__(self):
        return len(self.records)

    @property
    def e_cont(self):
        return np.array([r.e_cont for r in self.records])

    @property
    def e_reg(self):
        return np.array([r.e_reg for r in self.records])

    @property
    def e_disc(self):
        return np.array([r.e_disc for r in self.records])

    @property
    def s_k(self):
        return np.array([r.s_k for r in self.records])

    def reg_energies_with_initial(self):
        return np.concatenate([[self.initial_e_reg], self.e_reg])

    def write_csv(self, path, include_times=True):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in self.records:
                held = "" if r.bound_held is None else str(int(r.bound_held))
                t = repr(r.time_ms) if include_times else "0.0"
                fh.write(f"{r.k},{r.alpha!r},{r.e_cont!r},{r.e_reg!r},"
                         f"{r.e_disc!r},{r.s_k!r},{r.step_norm!r},"
                         f"{r.bound_delta!r},{held},{t}\n")


# ---------------------------------------------------------------------------
# building blocks

def initial_point(instance):
    """Default starting point: row-wise softmax of the negated unaries."""
    return softmax_rows(-instance.unary)


def lmo_vanilla(grad):
    """Vertex minimizing the linearized energy: per-node one-hot argmin.

    Ties break to the lowest label index; away from ties the output is
    locally constant in the gradient.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient contains non-finite entries")
    p = np.zeros_like(grad)
    p[np.arange(grad.shape[0]), np.argmin(grad, axis=1)] = 1.0
    return p


def direction_l2fw(instance, x, lam):
    """Direction point for l2-regularized linearization."""
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    return project_feasible(-instance.gradient(x) / lam)


def direction_efw(instance, x, lam):
    """Direction point for entropy-regularized linearization."""
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    return softmax_rows(-instance.gradient(x) / lam)


def _direction_from_gradient(grad, reg):
    if reg is None:
        return lmo_vanilla(grad)
    if isinstance(reg, L2Regularizer):
        return project_feasible(-grad / reg.lam)
    if isinstance(reg, EntropyRegularizer):
        return softmax_rows(-grad / reg.lam)
    raise TypeError(f"no direction oracle for regularizer {reg!r}")


def _gap(grad, x, p, reg):
    return float((grad * (x - p)).sum()) + regularizer_value(reg, x) \
        - regularizer_value(reg, p)


def conditional_gradient_norm(instance, x, reg=None):
    """Optimality measure S(x) >= 0, zero exactly at stationary points.

    S(x) = <grad E(x), x - p> + r(x) - r(p) with p from the direction
    oracle matching the regularizer.
    """
    x = np.asarray(x, dtype=float)
    grad = instance.gradient(x)
    p = _direction_from_gradient(grad, reg)
    return _gap(grad, x, p, reg)


def convexify(instance):
    """Equivalent instance whose relaxed energy is convex for
    nonnegative potentials.

    Shifts half the row mass of the pairwise operator onto the diagonal
    and compensates in the unaries, leaving every one-hot energy
    unchanged: with c = 0.5 * P 1, the new energy is
    0.5 x'(P + 2 diag(c))x + (u - c)'x.
    """
    n, d = instance.n_nodes, instance.n_labels
    c = 0.5 * instance.pairwise.matvec(np.ones((n, d)))
    backend = DiagonalShift(instance.pairwise, 2.0 * c)
    return CrfInstance(instance.unary - c, backend)


def _check_finite(value, trace):
    if not math.isfinite(value):
        raise Diverged("non-finite energy encountered", trace)
    return value


def _energies(instance, x, reg, record_disc):
    e_cont = instance.energy_relaxed(x)
    e_reg = e_cont + regularizer_value(reg, x)
    e_disc = instance.energy_discrete(round_nearest(x)) if record_disc else math.nan
    return e_cont, e_reg, e_disc


# ---------------------------------------------------------------------------
# the generalized Frank-Wolfe family (vanilla / convexified / l2 /
# entropic / mean field / pgd all share this loop)

def run_generalized_fw(instance, config):
    """Run a direction-plus-stepsize solver; returns (point, trace).

    Raises Diverged (carrying the partial trace) on non-finite energy.
    When `decrease_bound_check` is set, every iteration asserts the
    guaranteed decrease F_k - F_{k+1} >= delta_k - 1e-7 for the active
    schedule/regularizer combination.
    """
    method = config.method
    if isinstance(method, FastPGM):
        return _run_fast_pgm(instance, config)
    if isinstance(method, EMD):
        return _run_emd(instance, config)
    if isinstance(method, ADMM):
        return _run_admm(instance, config)

    work = convexify(instance) if isinstance(method, ConvexFW) else instance
    reg = config.regularizer
    sched = config.schedule
    is_pgd = isinstance(method, PGD)

    l_f = work.lipschitz_upper_bound()
    sigma = strong_convexity(reg)
    params = diagnostics.convergence_params(work, reg)
    bounds_apply = not is_pgd  # projected-gradient directions fall outside the analysis

    x = initial_point(work)
    trace = IterationTrace(method=method.name)
    trace.initial_e_cont, trace.initial_e_reg, trace.initial_e_disc = _energies(
        work, x, reg, config.record_discrete_energy)
    if config.record_iterates:
        trace.iterates = [x.copy()]
    f_prev = _check_finite(trace.initial_e_reg, trace)

    for k in range(config.max_iters):
        t0 = time.perf_counter()
        grad = work.gradient(x)
        if is_pgd:
            p = project_feasible(x - grad)
            s_k = _gap(grad, x, lmo_vanilla(grad), None)
        else:
            p = _direction_from_gradient(grad, reg)
            s_k = _gap(grad, x, p, reg)
        direction = p - x
        dir_sq = float((direction ** 2).sum())

        ctx = schedules.StepContext(s_k=s_k, dir_norm_sq=dir_sq,
                                    l_f=l_f, sigma_g=sigma)
        if isinstance(sched, schedules.LineSearch):
            quad_a = float((direction * work.pairwise.matvec(direction)).sum())
            quad_b = float((grad * direction).sum())
            if reg is None:
                ctx.quad_a, ctx.quad_b = quad_a, quad_b
            else:
                base = regularizer_value(reg, x)
                ctx.f_along = lambda a: (0.5 * quad_a * a * a + quad_b * a
                                         + regularizer_value(reg, x + a * direction)
                                         - base)
        alpha = schedules.stepsize(sched, k, ctx)

        x = p if alpha == 1.0 else x + alpha * direction
        e_cont, e_reg, e_disc = _energies(work, x, reg, config.record_discrete_energy)
        _check_finite(e_cont, trace)
        f_new = _check_finite(e_reg, trace)

        if bounds_apply:
            delta = diagnostics.decrease_bound(params, sched, k, s_k, dir_sq)
            held = (f_prev - f_new) >= (delta - _BOUND_TOL)
        else:
            delta, held = math.nan, None
        step_norm = alpha * math.sqrt(dir_sq)
        trace.records.append(IterationRecord(
            k=k, alpha=alpha, e_cont=e_cont, e_reg=e_reg, e_disc=e_disc,
            s_k=s_k, step_norm=step_norm, bound_delta=delta, bound_held=held,
            time_ms=(time.perf_counter() - t0) * 1e3))
        if config.record_iterates:
            trace.iterates.append(x.copy())
        if config.decrease_bound_check and held is False:
            raise AssertionError(
                f"decrease bound violated at iteration {k}: "
                f"F_k - F_k+1 = {f_prev - f_new:.3e} < delta_k = {delta:.3e}")
        f_prev = f_new
    return x, trace


def mean_field_run(instance, iters):
    """Plain parallel fixed-point iteration x <- softmax(-(Px + u)).

    Coincides with the entropic direction oracle at lam = 1 followed by
    a unit step, so the trace matches run_generalized_fw with that
    configuration bitwise.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    reg = EntropyRegularizer(1.0)
    x = initial_point(instance)
    trace = IterationTrace(method="mf")
    trace.initial_e_cont, trace.initial_e_reg, trace.initial_e_disc = _energies(
        instance, x, reg, True)
    trace.iterates = [x.copy()]
    params = diagnostics.convergence_params(instance, reg)
    sched = schedules.Constant(1.0)
    f_prev = trace.initial_e_reg
    for k in range(iters):
        t0 = time.perf_counter()
        grad = instance.gradient(x)
        p = softmax_rows(-grad / 1.0)
        s_k = _gap(grad, x, p, reg)
        dir_sq = float(((p - x) ** 2).sum())
        step_norm = math.sqrt(dir_sq)
        x = p
        e_cont, e_reg, e_disc = _energies(instance, x, reg, True)
        _check_finite(e_reg, trace)
        delta = diagnostics.decrease_bound(params, sched, k, s_k, dir_sq)
        trace.records.append(IterationRecord(
            k=k, alpha=1.0, e_cont=e_cont, e_reg=e_reg, e_disc=e_disc,
            s_k=s_k, step_norm=step_norm, bound_delta=delta,
            bound_held=(f_prev - e_reg) >= (delta - _BOUND_TOL),
            time_ms=(time.perf_counter() - t0) * 1e3))
        trace.iterates.append(x.copy())
        f_prev = e_reg
    return x, trace


# ---------------------------------------------------------------------------
# comparison methods outside the direction/stepsize template

def _run_fast_pgm(instance, config):
    """Accelerated projected gradient with the usual momentum sequence
    t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2."""
    sched = config.schedule
    x = initial_point(instance)
    y = x
    t = 1.0
    trace = IterationTrace(method="pgm")
    trace.initial_e_cont, trace.initial_e_reg, trace.initial_e_disc = _energies(
        instance, x, None, config.record_discrete_energy)
    _check_finite(trace.initial_e_cont, trace)
    if config.record_iterates:
        trace.iterates = [x.copy()]
    for k in range(config.max_iters):
        t0 = time.perf_counter()
        grad = instance.gradient(y)
        s_k = _gap(grad, y, lmo_vanilla(grad), None)
        # alpha scales the gradient here, not a convex combination
        alpha = schedules.stepsize(sched, k, schedules.StepContext(
            s_k=s_k, dir_norm_sq=1.0,
            l_f=instance.lipschitz_upper_bound(), sigma_g=0.0))
        x_new = project_feasible(y - alpha * grad)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        step_norm = float(np.linalg.norm(x_new - x))
        x, t = x_new, t_new
        e_cont, e_reg, e_disc = _energies(instance, x, None,
                                          config.record_discrete_energy)
        _check_finite(e_cont, trace)
        trace.records.append(IterationRecord(
            k=k, alpha=alpha, e_cont=e_cont, e_reg=e_reg, e_disc=e_disc,
            s_k=s_k, step_norm=step_norm, bound_delta=math.nan, bound_held=None,
            time_ms=(time.perf_counter() - t0) * 1e3))
        if config.record_iterates:
            trace.iterates.append(x.copy())
    return x, trace


def _run_emd(instance, config):
    """Multiplicative (entropy-geometry) updates, numerically stabilized.

    x_is <- (x_is + eps) * exp(-alpha_k g_is + m_i), renormalized per
    row, with m_i = alpha_k * min_s g_is so every exponent is <= 0.
    """
    eps = 1e-10
    sched = config.schedule
    x = initial_point(instance)
    trace = IterationTrace(method="emd")
    trace.initial_e_cont, trace.initial_e_reg, trace.initial_e_disc = _energies(
        instance, x, None, config.record_discrete_energy)
    _check_finite(trace.initial_e_cont, trace)
    if config.record_iterates:
        trace.iterates = [x.copy()]
    for k in range(config.max_iters):
        t0 = time.perf_counter()
        grad = instance.gradient(x)
        s_k = _gap(grad, x, lmo_vanilla(grad), None)
        # alpha is the multiplicative-update learning rate
        alpha = schedules.stepsize(sched, k, schedules.StepContext(
            s_k=s_k, dir_norm_sq=1.0,
            l_f=instance.lipschitz_upper_bound(), sigma_g=0.0))
        shift = alpha * grad.min(axis=1, keepdims=True)
        weights = (x + eps) * np.exp(-alpha * grad + shift)
        x_new = weights / weights.sum(axis=1, keepdims=True)
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        if not np.all(np.isfinite(x)):
            raise Diverged("non-finite iterate in multiplicative update", trace)
        e_cont, e_reg, e_disc = _energies(instance, x, None,
                                          config.record_discrete_energy)
        _check_finite(e_cont, trace)
        trace.records.append(IterationRecord(
            k=k, alpha=alpha, e_cont=e_cont, e_reg=e_reg, e_disc=e_disc,
            s_k=s_k, step_norm=step_norm, bound_delta=math.nan, bound_held=None,
            time_ms=(time.perf_counter() - t0) * 1e3))
        if config.record_iterates:
            trace.iterates.append(x.copy())
    return x, trace


def _run_admm(instance, config):
    """Two-block splitting with dual ascent; rho fixed.

    The two primal projections each cost one pairwise matvec, so each is
    counted (and recorded) as one iteration.  Both half-iterates are
    feasible by construction.
    """
    rho = config.method.rho
    u = instance.unary
    z = initial_point(instance)
    y = np.zeros_like(z)
    x = None
    trace = IterationTrace(method="admm")
    trace.initial_e_cont, trace.initial_e_reg, trace.initial_e_disc = _energies(
        instance, z, None, config.record_discrete_energy)
    _check_finite(trace.initial_e_cont, trace)
    if config.record_iterates:
        trace.iterates = [z.copy()]
    prev_point = z
    for k in range(config.max_iters):
        t0 = time.perf_counter()
        if k % 2 == 0:
            m = instance.pairwise.matvec(z)
            grad_at = m + u
            s_k = _gap(grad_at, z, lmo_vanilla(grad_at), None)
            x = project_feasible(z - (y + 0.5 * m + u) / rho)
            point = x
        else:
            m = instance.pairwise.matvec(x)
            grad_at = m + u
            s_k = _gap(grad_at, x, lmo_vanilla(grad_at), None)
            z = project_feasible(x - (-y + 0.5 * m) / rho)
            y = y + rho * (x - z)
            point = z
        step_norm = float(np.linalg.norm(point - prev_point))
        prev_point = point
        e_cont, e_reg, e_disc = _energies(instance, point, None,
                                          config.record_discrete_energy)
        _check_finite(e_cont, trace)
        trace.records.append(IterationRecord(
            k=k, alpha=math.nan, e_cont=e_cont, e_reg=e_reg, e_disc=e_disc,
            s_k=s_k, step_norm=step_norm, bound_delta=math.nan, bound_held=None,
            time_ms=(time.perf_counter() - t0) * 1e3))
        if config.record_iterates:
            trace.iterates.append(point.copy())
    return point, trace


# ---------------------------------------------------------------------------
# convenience entry points

def pgd_run(instance, config=None, **kwargs):
    config = _coerce_config(config, PGD(), **kwargs)
    return run_generalized_fw(instance, config)


def fpgm_run(instance, config=None, **kwargs):
    config = _coerce_config(config, FastPGM(), **kwargs)
    return run_generalized_fw(instance, config)


def emd_run(instance, config=None, **kwargs):
    config = _coerce_config(config, EMD(), **kwargs)
    return run_generalized_fw(instance, config)


def admm_run(instance, config=None, rho=1.0, **kwargs):
    config = _coerce_config(config, ADMM(rho=rho), **kwargs)
    return run_generalized_fw(instance, config)


def _coerce_config(config, method, **kwargs):
    if config is None:
        return SolverConfig(method=method, **kwargs)
    if not isinstance(config.method, type(method)):
        config = replace(config, method=method)
    return config
