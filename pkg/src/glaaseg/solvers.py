"""Segmentation solvers for the hybrid gamma-fitting energy.

Four solvers share one data term ``eta`` (see :mod:`glaaseg.energy`):

``model1``
    explicit level-set gradient flow with edge-weighted curvature;
``model2``
    split Bregman on the anisotropic-TV convex relaxation, one Jacobi sweep of
    the discrete Poisson update per outer iteration;
``model3``
    fixed-point iteration 1: proximal step plus a relaxed dual
    ``(I - shrink)`` update, no linear solve;
``model4``
    fixed-point iteration 2: the same dual update with an extra Bregman
    variable ``c`` splitting the data term from the TV term.

Models 2-4 keep ``phi`` in ``[0, 1]`` and segment by ``phi > gamma``; model 1
segments by ``phi > 0``.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .energy import (
    EnergyParams,
    data_term_eta,
    default_beta,
    delta_eps,
    edge_indicator,
    gcs_objective,
    heaviside_eps,
    local_fits_weighted,
    objective_unchecked,
    region_means_weighted,
    region_stats_from_sums,
)
from .grid import (
    ParameterError,
    adjoint_diff,
    as_field,
    clamp_to_floor,
    edge_divergence,
    edge_gradient,
    forward_diff,
    neighbour_sum,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SegmentationResult",
    "SolverError",
    "SOLVERS",
    "BACKENDS",
    "PRESETS",
    "DEFAULT_PRESET",
    "preset_config",
    "default_config",
    "ensure_compiled",
    "shrink",
    "clip_shrink_residual",
    "threshold_mask",
    "stability_bound",
    "check_stability",
    "compute_eta",
    "step_levelset",
    "solve_levelset",
    "solve_split_bregman",
    "solve_fpa1",
    "solve_fpa2",
    "segment",
]

SOLVERS = ("model1", "model2", "model3", "model4")
BACKENDS = ("compiled", "numpy")


class SolverError(RuntimeError):
    """A solver produced a non-finite intermediate and aborted."""


@dataclass(frozen=True)
class SolverConfig:
    """Scalar parameters shared by all solvers.

    ``lam`` is the TV penalty weight (``lambda``). ``tol <= 0`` disables the
    relative-change stopping test so exactly ``max_iters`` iterations run.
    ``edge_shrink`` switches the dual threshold of model 4 from ``1/lam`` to
    the per-pixel ``g/lam``. ``backend="numpy"`` runs the array-operator
    reference loops instead of the fused compiled kernels; both produce the
    same iterates up to rounding.
    """

    mu: float = 20.0
    lam: float = 0.02
    alpha: float = 0.2
    t: float = 1e-5
    gamma: float = 0.5
    dt: float = 0.1
    epsilon: float = 1.0
    sigma: float = 3.0
    omega: float = 1.0
    beta: float | None = None
    max_iters: int = 300
    tol: float = 1e-4
    stats_refresh: int = 1
    eps_curv: float = 1e-8
    edge_shrink: bool = False
    backend: str = "compiled"

    def __post_init__(self):
        checks = [
            (self.mu > 0, "mu must be > 0"),
            (self.lam > 0, "lambda must be > 0"),
            (self.alpha > 0, "alpha must be > 0"),
            (0 < self.t < 1, "t must lie in (0, 1)"),
            (0 < self.gamma < 1, "gamma must lie in (0, 1)"),
            (self.dt > 0, "dt must be > 0"),
            (self.epsilon > 0, "epsilon must be > 0"),
            (self.sigma > 0, "sigma must be > 0"),
            (0 <= self.omega <= 1, "omega must lie in [0, 1]"),
            (self.beta is None or self.beta > 0, "beta must be > 0"),
            (int(self.max_iters) == self.max_iters and self.max_iters >= 1, "max_iters must be >= 1"),
            (int(self.stats_refresh) == self.stats_refresh and self.stats_refresh >= 1,
             "stats_refresh must be >= 1"),
            (self.eps_curv > 0, "eps_curv must be > 0"),
            (self.backend in BACKENDS, f"backend must be one of {BACKENDS}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)

    def with_(self, **changes):
        return replace(self, **changes)


# Named parameter sets: (suggested solver or None, SolverConfig overrides).
PRESETS = {
    # settings tuned for the synthetic phantoms
    "synth-model1": ("model1", {"mu": 255.0, "dt": 0.1, "epsilon": 1.0}),
    "synth-model2": ("model2", {"mu": 20.0, "lam": 0.02, "alpha": 0.2, "gamma": 0.5}),
    "synth-fpa": ("model3", {"mu": 20.0, "lam": 0.02, "alpha": 0.2, "t": 1e-5, "gamma": 0.5}),
    # weak data term: trades small detail for clean interior boundaries under L=2 speckle
    "interior": (None, {"mu": 1.0}),
}

DEFAULT_PRESET = {
    "model1": "synth-model1",
    "model2": "synth-model2",
    "model3": "synth-fpa",
    "model4": "synth-fpa",
}


def preset_config(name, **overrides):
    """``SolverConfig`` for preset ``name`` with keyword ``overrides`` applied on top."""
    try:
        _, values = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return SolverConfig(**{**values, **overrides})


def default_config(solver, **overrides):
    """The default parameter set for ``solver``."""
    if solver not in DEFAULT_PRESET:
        raise ParameterError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    return preset_config(DEFAULT_PRESET[solver], **overrides)


@dataclass
class SegmentationResult:
    solver: str
    phi: np.ndarray
    mask: np.ndarray
    iterations: int
    wall_time: float
    objective_trace: list = field(default_factory=list)
    stats_trace: list = field(default_factory=list)
    converged: bool = False
    degenerate: bool = False
    warnings: list = field(default_factory=list)


# --- elementwise operators -------------------------------------------------


def shrink(x, theta):
    """Soft threshold ``sgn(x) * max(|x| - theta, 0)``; ``theta`` may be an array."""
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0):
        raise ParameterError("shrink threshold must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
    return float(out) if out.ndim == 0 else out


def clip_shrink_residual(x, theta):
    """``(I - shrink_theta)(x)``, which is exactly ``clip(x, -theta, theta)``."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.clip(x, -theta, theta)


def threshold_mask(phi, gamma):
    """Binary mask ``phi > gamma`` (strict)."""
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    return np.asarray(phi) > gamma


def stability_bound(n):
    """Largest admissible ``lam / alpha``: ``sin(((n-1) pi) / (2n)) ** -2 / 4``."""
    if n < 2:
        raise ParameterError(f"grid dimension must be >= 2, got {n}")
    return 0.25 / math.sin((n - 1) * math.pi / (2 * n)) ** 2


def check_stability(lam, alpha, n):
    """Return ``"ok"`` if the fixed-point map is nonexpansive, else ``"warning"``."""
    ratio = lam / alpha
    if ratio < stability_bound(n):
        return "ok"
    return "warning"


# --- data term -------------------------------------------------------------


def _energy_params(config):
    return EnergyParams(
        mu=config.mu, epsilon=config.epsilon, sigma=config.sigma,
        omega=config.omega, beta=config.beta,
    )


def compute_eta(f, weight, config):
    """Data term for region weights ``weight`` (soft or hard); returns ``(eta, stats)``."""
    stats = region_means_weighted(f, weight)
    fits = None
    if config.omega < 1.0:
        fits = local_fits_weighted(f, weight, config.sigma, fallback=stats)
    return data_term_eta(f, stats, fits, _energy_params(config)), stats


def _prepare_image(f):
    f = as_field(f, "image")
    if np.any(f < 0):
        raise ParameterError("image intensities must be nonnegative")
    return clamp_to_floor(f)


def _check_finite(name, k, *arrays):
    # NaN and Inf propagate through sums, so one reduction per array suffices.
    if not math.isfinite(sum(float(a.sum()) for a in arrays)):
        raise SolverError(f"{name}: non-finite value at iteration {k}")


def _rel_change(new, old):
    diff = new - old
    num = float(np.vdot(diff, diff))
    den = float(np.vdot(old, old))
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


def _degenerate_result(name, f, phi):
    msg = "degenerate segmentation: constant image, no region contrast"
    log.warning(msg)
    return SegmentationResult(
        solver=name, phi=phi, mask=np.zeros(f.shape, dtype=bool), iterations=0,
        wall_time=0.0, converged=True, degenerate=True, warnings=[msg],
    )


class _EtaSource:
    """Data-term provider: frozen ``eta`` or refreshed from the current mask."""

    def __init__(self, f, config, eta=None):
        self.f = f
        self.config = config
        self.frozen = None if eta is None else as_field(eta, "eta")
        self.stats = None

    def __call__(self, weight):
        if self.frozen is not None:
            return self.frozen
        eta, self.stats = compute_eta(self.f, weight, self.config)
        return eta


# --- model 1: level-set flow -----------------------------------------------


def curvature_term(phi, g, eps_curv):
    """``div(g * grad(phi) / |grad(phi)|)`` with forward gradient, backward divergence."""
    px = forward_diff(phi, "x")
    py = forward_diff(phi, "y")
    norm = np.sqrt(px**2 + py**2 + eps_curv**2)
    return -(adjoint_diff(g * px / norm, "x") + adjoint_diff(g * py / norm, "y"))


def step_levelset(phi, f, g, config, eta=None):
    """One explicit Euler step of the level-set flow.

    ``phi += dt * delta_eps(phi) * (div(g grad phi / |grad phi|) - mu * eta)``.
    ``eta`` is recomputed from ``H_eps(phi)`` when not supplied.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if eta is None:
        eta, _ = compute_eta(clamp_to_floor(f), heaviside_eps(phi, config.epsilon), config)
    rhs = delta_eps(phi, config.epsilon) * (
        curvature_term(phi, g, config.eps_curv) - config.mu * eta
    )
    return phi + config.dt * rhs


def initial_levelset(shape, init_mask=None):
    """Binary step level set: +1 on ``init_mask``, -1 elsewhere.

    The default region is the centred box spanning the middle half of each axis.
    """
    h, w = shape
    if init_mask is None:
        init_mask = np.zeros(shape, dtype=bool)
        init_mask[h // 4 : h - h // 4, w // 4 : w - w // 4] = True
    init_mask = np.asarray(init_mask, dtype=bool)
    if init_mask.shape != tuple(shape):
        raise ParameterError("init_mask shape does not match image")
    return np.where(init_mask, 1.0, -1.0)


def _solve_levelset_numpy(f, config, *, init_mask=None, g=None, eta=None, callback=None):
    """Model 1: gradient-descent flow of the level-set energy.

    Passing ``eta`` freezes the data term; otherwise it is refreshed from
    ``H_eps(phi)`` every ``config.stats_refresh`` steps.
    """
    name = "model1"
    f = _prepare_image(f)
    phi = initial_levelset(f.shape, init_mask)
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    frozen = eta is not None
    if frozen:
        eta = as_field(eta, "eta")
        if eta.shape != f.shape:
            raise ParameterError(f"eta shape {eta.shape} does not match image {f.shape}")
    if g is None:
        beta = config.beta if config.beta is not None else default_beta(f)
        g = edge_indicator(f, config.sigma, beta)
    start = time.perf_counter()
    result = SegmentationResult(solver=name, phi=phi, mask=phi > 0, iterations=0, wall_time=0.0)
    stats = None
    for k in range(config.max_iters):
        if not frozen and k % config.stats_refresh == 0:
            eta, stats = compute_eta(f, heaviside_eps(phi, config.epsilon), config)
        new = step_levelset(phi, f, g, config, eta=eta)
        _check_finite(name, k, new)
        change = _rel_change(new, phi)
        phi = new
        mask = phi > 0
        result.objective_trace.append(objective_unchecked(mask.astype(np.float64), eta, config.mu))
        result.stats_trace.append(stats)
        result.iterations = k + 1
        if callback is not None:
            callback(k, phi=phi, mask=mask, eta=eta)
        if config.tol > 0 and change < config.tol:
            result.converged = True
            break
    result.phi = phi
    result.mask = phi > 0
    result.degenerate = bool(stats is not None and stats.degenerate)
    result.wall_time = time.perf_counter() - start
    return result


# --- convex models ---------------------------------------------------------
#
# Dual and split variables live on edges: x-fields have shape (h, w-1) and
# y-fields (h-1, w), i.e. forward differences without their zero boundary
# entries (see grid.edge_gradient / grid.edge_divergence).


def _convex_init(f, phi0):
    if phi0 is not None:
        return np.clip(as_field(phi0, "phi0"), 0.0, 1.0)
    return f / f.max()


def _pair_change(new, old):
    """Relative l2 change of a pair of edge fields."""
    num = sum(float(np.vdot(n - o, n - o)) for n, o in zip(new, old))
    den = sum(float(np.vdot(o, o)) for o in old)
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


def _zeros_edges(shape):
    h, w = shape
    return np.zeros((h, w - 1)), np.zeros((h - 1, w))


class _Loop:
    """Iteration bookkeeping shared by the convex solvers."""

    def __init__(self, name, f, config, eta, phi):
        self.config = config
        self.source = _EtaSource(f, config, eta)
        self.result = SegmentationResult(
            solver=name, phi=phi, mask=phi > config.gamma, iterations=0, wall_time=0.0)
        self.name = name
        self.start = time.perf_counter()

    def eta(self, phi):
        return self.source(phi > self.config.gamma)

    def record(self, k, phi, eta, change, callback, grad=None):
        """Log iteration ``k``; returns True when the stopping test fires.

        ``grad`` is an optional precomputed ``edge_gradient(phi)``.
        """
        res = self.result
        if grad is None:
            res.objective_trace.append(objective_unchecked(phi, eta, self.config.mu))
        else:
            tv = float(np.abs(grad[0]).sum() + np.abs(grad[1]).sum())
            res.objective_trace.append(tv + self.config.mu * float(np.vdot(phi, eta)))
        if not math.isfinite(res.objective_trace[-1]):
            raise SolverError(f"{self.name}: non-finite objective at iteration {k}")
        res.stats_trace.append(self.source.stats)
        res.iterations = k + 1
        if callback is not None:
            callback(k, phi=phi, mask=phi > self.config.gamma, eta=eta)
        if self.config.tol > 0 and change < self.config.tol:
            res.converged = True
            return True
        return False

    def finish(self, phi):
        res = self.result
        res.phi = phi
        res.mask = threshold_mask(phi, self.config.gamma)
        res.degenerate = bool(self.source.stats is not None and self.source.stats.degenerate)
        res.wall_time = time.perf_counter() - self.start
        return res


def _solve_split_bregman_numpy(f, config, *, eta=None, phi0=None, callback=None):
    """Model 2: split Bregman with one Jacobi sweep per outer iteration.

    Each iteration evaluates, with all right-hand sides from the previous
    iterate::

        phi <- clip((neighbour_sum(phi) - mu eta / lam + grad^T (d - b)) / 4, 0, 1)
        d   <- shrink(grad phi + b, 1 / lam)
        b   <- b + grad phi - d

    Passing ``eta`` freezes the data term; otherwise it is refreshed every
    iteration from the mask ``phi > gamma``. The stopping test watches both
    ``phi`` and the Bregman variables ``b`` so a clamped, momentarily static
    ``phi`` does not end the run early.
    """
    name = "model2"
    f = _prepare_image(f)
    phi = _convex_init(f, phi0)
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    loop = _Loop(name, f, config, eta, phi)
    lam, mu = config.lam, config.mu
    theta = 1.0 / lam
    dx, dy = _zeros_edges(phi.shape)
    bx, by = _zeros_edges(phi.shape)
    for k in range(config.max_iters):
        e = loop.eta(phi)
        rhs = edge_divergence(dx - bx, dy - by)
        new = 0.25 * (neighbour_sum(phi) - (mu / lam) * e + rhs)
        np.clip(new, 0.0, 1.0, out=new)
        gx, gy = edge_gradient(new)
        # d = shrink(s), b + grad - d = s - shrink(s) = clip(s) with s = grad + b
        sx = gx + bx
        sy = gy + by
        bx_new = clip_shrink_residual(sx, theta)
        by_new = clip_shrink_residual(sy, theta)
        dx = sx - bx_new
        dy = sy - by_new
        _check_finite(name, k, new, bx_new, by_new)
        change = max(_rel_change(new, phi), _pair_change((bx_new, by_new), (bx, by)))
        phi, bx, by = new, bx_new, by_new
        if loop.record(k, phi, e, change, callback, grad=(gx, gy)):
            break
    return loop.finish(phi)


def _stability_warning(f, config, result):
    status = check_stability(config.lam, config.alpha, min(f.shape))
    if status != "ok":
        msg = (f"lambda/alpha = {config.lam / config.alpha:.4g} exceeds the nonexpansive bound "
               f"{stability_bound(min(f.shape)):.6g}")
        log.warning(msg)
        result.warnings.append(msg)


def _dual_update(b, grad, theta, t):
    """Relaxed dual step ``t b + (1 - t) (I - shrink_theta)(grad + b)``."""
    return t * b + (1.0 - t) * clip_shrink_residual(grad + b, theta)


def _solve_fpa1_numpy(f, config, *, eta=None, phi0=None, callback=None):
    """Model 3: proximal fixed-point iteration with relaxed dual update.

    ::

        b   <- t b + (1 - t) clip(grad phi + b, -1/lam, 1/lam)
        phi <- clip(phi - mu eta / alpha - (lam / alpha) grad^T b, 0, 1)
    """
    name = "model3"
    f = _prepare_image(f)
    phi = _convex_init(f, phi0)
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    loop = _Loop(name, f, config, eta, phi)
    _stability_warning(f, config, loop.result)
    lam, alpha, mu, t = config.lam, config.alpha, config.mu, config.t
    theta = 1.0 / lam
    bx, by = _zeros_edges(phi.shape)
    gx, gy = edge_gradient(phi)
    for k in range(config.max_iters):
        e = loop.eta(phi)
        bx_new = _dual_update(bx, gx, theta, t)
        by_new = _dual_update(by, gy, theta, t)
        new = phi - (mu / alpha) * e - (lam / alpha) * edge_divergence(bx_new, by_new)
        np.clip(new, 0.0, 1.0, out=new)
        _check_finite(name, k, new, bx_new, by_new)
        change = max(_rel_change(new, phi), _pair_change((bx_new, by_new), (bx, by)))
        phi, bx, by = new, bx_new, by_new
        gx, gy = edge_gradient(phi)
        if loop.record(k, phi, e, change, callback, grad=(gx, gy)):
            break
    return loop.finish(phi)


def _edge_threshold(g, lam):
    """Per-edge ``g / lam`` for the x and y dual fields (edge value = left/top pixel)."""
    g = np.asarray(g, dtype=np.float64)
    return g[:, :-1] / lam, g[:-1, :] / lam


def _solve_fpa2_numpy(f, config, *, eta=None, phi0=None, g=None, callback=None):
    """Model 4: fixed-point iteration with a Bregman variable on the data split.

    Per iteration, with ``u`` the primal and ``v`` the clamped auxiliary::

        b  <- t b + (1 - t) clip(grad u + b, -theta, theta)
        v  <- clip(u - c - (mu / alpha) eta, 0, 1)
        c  <- c + v - u
        u  <- v + c - (lam / alpha) grad^T b

    ``theta`` is ``1/lam``, or ``g/lam`` with ``config.edge_shrink``. The
    segmentation thresholds ``v``, which is also the returned ``phi``.
    """
    name = "model4"
    f = _prepare_image(f)
    u = _convex_init(f, phi0)
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, u)
    lam, alpha, mu, t = config.lam, config.alpha, config.mu, config.t
    if config.edge_shrink:
        if g is None:
            beta = config.beta if config.beta is not None else default_beta(f)
            g = edge_indicator(f, config.sigma, beta)
        theta_x, theta_y = _edge_threshold(g, lam)
    else:
        theta_x = theta_y = 1.0 / lam
    v = u.copy()
    loop = _Loop(name, f, config, eta, v)
    _stability_warning(f, config, loop.result)
    bx, by = _zeros_edges(u.shape)
    c = np.zeros_like(u)
    for k in range(config.max_iters):
        e = loop.eta(v)
        gx, gy = edge_gradient(u)
        bx_new = _dual_update(bx, gx, theta_x, t)
        by_new = _dual_update(by, gy, theta_y, t)
        v_new = u - c - (mu / alpha) * e
        np.clip(v_new, 0.0, 1.0, out=v_new)
        c = c + v_new - u
        u = v_new + c - (lam / alpha) * edge_divergence(bx_new, by_new)
        _check_finite(name, k, u, c, bx_new, by_new)
        change = max(_rel_change(v_new, v), _pair_change((bx_new, by_new), (bx, by)))
        v, bx, by = v_new, bx_new, by_new
        if loop.record(k, v, e, change, callback):
            break
    return loop.finish(v)


# --- compiled drivers --------------------------------------------------------
#
# Same iterations as the reference loops above, one fused kernel call per
# iteration. Work buffers are swapped rather than reallocated, so callbacks
# receive copies.


_compiled = False


def ensure_compiled():
    """Compile (or load from cache) the kernels so timings exclude JIT cost."""
    global _compiled
    if not _compiled:
        _kernels.warmup()
        _compiled = True


def _ratio(num, den):
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


class _Run:
    """Bookkeeping for a compiled solve: data-term refresh, traces, stopping."""

    def __init__(self, name, f, config, phi, level, eta=None):
        ensure_compiled()
        self.f = f
        self.config = config
        self.level = level
        if eta is None:
            self.frozen = False
            self.eta = np.empty_like(f)
        else:
            self.frozen = True
            self.eta = np.array(as_field(eta, "eta"), dtype=np.float64)
            if self.eta.shape != f.shape:
                raise ParameterError(f"eta shape {self.eta.shape} does not match image {f.shape}")
        self.stats = None
        self._sums = (float(f.sum()), f.size, float(f.min()), float(f.max()))
        self.result = SegmentationResult(
            solver=name, phi=phi, mask=phi > level, iterations=0, wall_time=0.0)
        self.start = time.perf_counter()

    def refresh(self, s1=None, m1=None, weight=None):
        """Recompute ``eta`` from region sums, or from ``weight()`` when local fits are on."""
        if self.frozen:
            return
        cfg = self.config
        if cfg.omega < 1.0 or s1 is None:
            eta, self.stats = compute_eta(self.f, weight(), cfg)
            self.eta[...] = eta
            return
        total, n, lo, hi = self._sums
        st = region_stats_from_sums(s1, m1, total, n, lo, hi)
        self.stats = st
        np.multiply(self.f, 1.0 / st.c1 - 1.0 / st.c2, out=self.eta)
        self.eta += math.log(st.c1 / st.c2)

    def record(self, k, objective, change, phi, callback):
        if not math.isfinite(objective + change):
            raise SolverError(f"{self.result.solver}: non-finite value at iteration {k}")
        res = self.result
        res.objective_trace.append(objective)
        res.stats_trace.append(self.stats)
        res.iterations = k + 1
        if callback is not None:
            callback(k, phi=phi.copy(), mask=phi > self.level, eta=self.eta.copy())
        if self.config.tol > 0 and change < self.config.tol:
            res.converged = True
            return True
        return False

    def settle_tv(self, k, tv):
        """Add ``tv``, the TV of iterate ``k``, to the objective logged at step ``k - 1``.

        The fused FPA kernels measure the TV of their input, i.e. one step late.
        """
        if k > 0:
            self.result.objective_trace[k - 1] += tv

    def finish(self, phi, lagged_tv=False):
        res = self.result
        if lagged_tv and res.objective_trace:
            res.objective_trace[-1] += _kernels.total_variation(phi)
        res.phi = phi
        res.mask = phi > self.level
        res.degenerate = bool(self.stats is not None and self.stats.degenerate)
        res.wall_time = time.perf_counter() - self.start
        return res


def _mask_refresh(run, phi, gamma):
    m = phi > gamma
    run.refresh(float(run.f[m].sum()), float(m.sum()), lambda: m.astype(np.float64))


def _solve_levelset_compiled(f, config, *, init_mask=None, g=None, eta=None, callback=None):
    name = "model1"
    f = _prepare_image(f)
    phi = initial_levelset(f.shape, init_mask)
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    if g is None:
        beta = config.beta if config.beta is not None else default_beta(f)
        g = edge_indicator(f, config.sigma, beta)
    g = np.ascontiguousarray(g, dtype=np.float64)
    run = _Run(name, f, config, phi, 0.0, eta)
    run.refresh(weight=lambda: heaviside_eps(phi, config.epsilon))
    nx, ny, out = np.empty_like(phi), np.empty_like(phi), np.empty_like(phi)
    every = config.stats_refresh
    fast_stats = config.omega == 1.0
    for k in range(config.max_iters):
        refresh = not run.frozen and (k + 1) % every == 0
        dphi2, phi2, tv, dot, s1, m1 = _kernels.levelset_step(
            phi, f, g, run.eta, config.mu, config.dt, config.epsilon, config.eps_curv,
            refresh and fast_stats, nx, ny, out)
        phi, out = out, phi
        if run.record(k, tv + config.mu * dot, _ratio(dphi2, phi2), phi, callback):
            break
        if refresh:
            if fast_stats:
                run.refresh(s1, m1)
            else:
                run.refresh(weight=lambda: heaviside_eps(phi, config.epsilon))
    return run.finish(phi)


def _solve_split_bregman_compiled(f, config, *, eta=None, phi0=None, callback=None):
    name = "model2"
    f = _prepare_image(f)
    phi = np.ascontiguousarray(_convex_init(f, phi0))
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    gamma = config.gamma
    run = _Run(name, f, config, phi, gamma, eta)
    _mask_refresh(run, phi, gamma)
    dx, dy = _zeros_edges(phi.shape)
    bx, by = _zeros_edges(phi.shape)
    out = np.empty_like(phi)
    mu_l, theta = config.mu / config.lam, 1.0 / config.lam
    for k in range(config.max_iters):
        dphi2, phi2, db2, b2, tv, dot, s1, m1 = _kernels.split_bregman_step(
            phi, dx, dy, bx, by, run.eta, f, mu_l, theta, gamma, out)
        phi, out = out, phi
        change = max(_ratio(dphi2, phi2), _ratio(db2, b2))
        if run.record(k, tv + config.mu * dot, change, phi, callback):
            break
        run.refresh(s1, m1, lambda: (phi > gamma).astype(np.float64))
    return run.finish(phi)


def _solve_fpa1_compiled(f, config, *, eta=None, phi0=None, callback=None):
    name = "model3"
    f = _prepare_image(f)
    phi = np.ascontiguousarray(_convex_init(f, phi0))
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, phi)
    gamma = config.gamma
    run = _Run(name, f, config, phi, gamma, eta)
    _stability_warning(f, config, run.result)
    _mask_refresh(run, phi, gamma)
    bx, by = _zeros_edges(phi.shape)
    thx, thy = np.full_like(bx, 1.0 / config.lam), np.full_like(by, 1.0 / config.lam)
    out = np.empty_like(phi)
    mu_a, lam_a = config.mu / config.alpha, config.lam / config.alpha
    for k in range(config.max_iters):
        dphi2, phi2, db2, b2, tv, dot, s1, m1 = _kernels.fpa1_step(
            phi, bx, by, run.eta, f, mu_a, lam_a, config.t, thx, thy, gamma, out)
        run.settle_tv(k, tv)
        phi, out = out, phi
        change = max(_ratio(dphi2, phi2), _ratio(db2, b2))
        if run.record(k, config.mu * dot, change, phi, callback):
            break
        run.refresh(s1, m1, lambda: (phi > gamma).astype(np.float64))
    return run.finish(phi, lagged_tv=True)


def _solve_fpa2_compiled(f, config, *, eta=None, phi0=None, g=None, callback=None):
    name = "model4"
    f = _prepare_image(f)
    u = np.ascontiguousarray(_convex_init(f, phi0))
    if eta is None and f.max() == f.min():
        return _degenerate_result(name, f, u)
    gamma = config.gamma
    bx, by = _zeros_edges(u.shape)
    if config.edge_shrink:
        if g is None:
            beta = config.beta if config.beta is not None else default_beta(f)
            g = edge_indicator(f, config.sigma, beta)
        thx, thy = (np.ascontiguousarray(a) for a in _edge_threshold(g, config.lam))
    else:
        thx, thy = np.full_like(bx, 1.0 / config.lam), np.full_like(by, 1.0 / config.lam)
    v = u.copy()
    run = _Run(name, f, config, v, gamma, eta)
    _stability_warning(f, config, run.result)
    _mask_refresh(run, v, gamma)
    c = np.zeros_like(u)
    out_u, out_v = np.empty_like(u), np.empty_like(u)
    mu_a, lam_a = config.mu / config.alpha, config.lam / config.alpha
    for k in range(config.max_iters):
        dv2, v2, db2, b2, tv, dot, s1, m1 = _kernels.fpa2_step(
            u, v, c, bx, by, run.eta, f, mu_a, lam_a, config.t, thx, thy, gamma, out_u, out_v)
        run.settle_tv(k, tv)
        u, out_u = out_u, u
        v, out_v = out_v, v
        change = max(_ratio(dv2, v2), _ratio(db2, b2))
        if run.record(k, config.mu * dot, change, v, callback):
            break
        run.refresh(s1, m1, lambda: (v > gamma).astype(np.float64))
    return run.finish(v, lagged_tv=True)


def _dispatch(compiled, reference):
    def solve(f, config, **kwargs):
        fn = compiled if config.backend == "compiled" else reference
        return fn(f, config, **kwargs)

    solve.__doc__ = reference.__doc__
    return solve


solve_levelset = _dispatch(_solve_levelset_compiled, _solve_levelset_numpy)
solve_split_bregman = _dispatch(_solve_split_bregman_compiled, _solve_split_bregman_numpy)
solve_fpa1 = _dispatch(_solve_fpa1_compiled, _solve_fpa1_numpy)
solve_fpa2 = _dispatch(_solve_fpa2_compiled, _solve_fpa2_numpy)
solve_levelset.__name__ = "solve_levelset"
solve_split_bregman.__name__ = "solve_split_bregman"
solve_fpa1.__name__ = "solve_fpa1"
solve_fpa2.__name__ = "solve_fpa2"


def segment(f, solver, config=None, **kwargs):
    """Run ``solver`` (one of :data:`SOLVERS`) on image ``f``.

    Without ``config`` the solver's default parameter set is used.
    """
    if config is None:
        config = default_config(solver)
    funcs = {
        "model1": solve_levelset,
        "model2": solve_split_bregman,
        "model3": solve_fpa1,
        "model4": solve_fpa2,
    }
    try:
        fn = funcs[solver]
    except KeyError:
        raise ParameterError(f"unknown solver {solver!r}; expected one of {SOLVERS}") from None
    return fn(f, config, **kwargs)
