"""Online updates for pseudo-LDS parameters.

``ftrl_theory`` re-solves the regularized leader over the composite-norm ball
each round.  The squared loss is quadratic in the flattened parameters, so the
history is kept as sufficient statistics ``G = sum Phi^T Phi``,
``b = sum Phi^T y``, ``c = sum |y|^2`` and the round objective is

    F(theta) = theta^T G theta - 2 b^T theta + c + R(theta) / eta.

``ridge_practical`` takes one gradient step on the newest loss plus a ridge
penalty, with no projection.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .pseudo_lds import (
    Dims,
    FeatureVector,
    PseudoLDS,
    design_matrix,
    gradient,
    predict,
    regularizer,
    regularizer_exponents,
    regularizer_gradient,
)
from .rng import stream

log = logging.getLogger("wavecast.learner")

MODES = ("ftrl_theory", "ridge_practical")
SCHEDULES = ("constant", "inverse_sqrt", "normalized")
SOLVERS = ("preconditioned", "gradient")


@dataclass(frozen=True)
class LearnerConfig:
    mode: str = "ftrl_theory"
    eta: float | None = None  # None: sqrt(horizon)
    radius: float | None = None  # None: 10 * sqrt(parameter count)
    horizon: int = 1000
    inner_iters: int = 50
    inner_tol: float = 1e-10
    inner_solver: str = "preconditioned"
    probe_points: int = 16
    stats_cap: int = 4000
    step_size: float = 0.5
    step_schedule: str = "normalized"
    ridge_lambda: float = 0.0
    norm_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.horizon < 1 or self.inner_iters < 1:
            raise ValueError("horizon and inner_iters must be >= 1")
        if not self.inner_tol > 0 or not self.norm_eps > 0:
            raise ValueError("tolerances must be positive")
        if self.step_schedule not in SCHEDULES:
            raise ValueError(f"step_schedule must be one of {SCHEDULES}")
        if self.inner_solver not in SOLVERS:
            raise ValueError(f"inner_solver must be one of {SOLVERS}")
        if not self.step_size > 0 or self.ridge_lambda < 0 or self.probe_points < 0:
            raise ValueError("step_size must be positive, ridge_lambda and probe_points non-negative")

    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else math.sqrt(self.horizon)

    def resolved_radius(self, dims: Dims, beta_mode: str) -> float:
        return self.radius if self.radius is not None else 10.0 * math.sqrt(dims.size(beta_mode))


@dataclass
class LearnerState:
    theta: PseudoLDS
    t: int = 0
    G: np.ndarray | None = None
    b: np.ndarray | None = None
    c: float = 0.0
    raw_phi: list = field(default_factory=list)
    raw_y: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    last: dict = field(default_factory=dict)

    @property
    def dims(self) -> Dims:
        return self.theta.dims

    @property
    def beta_mode(self) -> str:
        return self.theta.beta_mode

    @property
    def uses_stats(self) -> bool:
        return self.G is not None


def init_state(dims: Dims, beta_mode: str = "scalar", config: LearnerConfig | None = None,
               theta0: PseudoLDS | None = None) -> LearnerState:
    config = config or LearnerConfig()
    theta = PseudoLDS.zeros(dims, beta_mode) if theta0 is None else theta0
    if theta.dims != dims or theta.beta_mode != beta_mode:
        raise ValueError("initial theta does not match dims/beta_mode")
    state = LearnerState(theta=theta)
    state.flags = regularizer_exponents(dims.W, dims.tau)[2]
    if config.mode == "ftrl_theory":
        D = dims.size(beta_mode)
        if D <= config.stats_cap:
            state.G = np.zeros((D, D))
            state.b = np.zeros(D)
        radius = config.resolved_radius(dims, beta_mode)
        if composite_norm_vec(theta.to_vector(), dims, beta_mode) > radius:
            state.theta = project_onto_ball(theta, radius)
    return state


# ---------------------------------------------------------------- projection

def _group_index(dims: Dims, beta_mode: str) -> np.ndarray:
    """Group id per flattened coordinate; composite norm = sum of group l2 norms."""
    shapes = dims.shapes(beta_mode)
    ids, gid = [], 0
    for blk in ("M", "N"):
        per = int(np.prod(shapes[blk][1:]))
        ids.append(np.repeat(np.arange(gid, gid + dims.W), per))
        gid += dims.W
    per = 1 if beta_mode == "scalar" else dims.m * dims.m
    ids.append(np.repeat(np.arange(gid, gid + dims.tau), per))
    gid += dims.tau
    ids.append(np.full(int(np.prod(shapes["P"])), gid))
    return np.concatenate(ids)


_GROUP_CACHE: dict = {}


def _groups(dims: Dims, beta_mode: str) -> tuple[np.ndarray, int]:
    key = (dims, beta_mode)
    if key not in _GROUP_CACHE:
        idx = _group_index(dims, beta_mode)
        _GROUP_CACHE[key] = (idx, int(idx.max()) + 1)
    return _GROUP_CACHE[key]


def _group_norms(vec, idx, ngroups) -> np.ndarray:
    return np.sqrt(np.bincount(idx, weights=vec * vec, minlength=ngroups))


def composite_norm_vec(vec, dims: Dims, beta_mode: str) -> float:
    idx, ng = _groups(dims, beta_mode)
    return float(np.sum(_group_norms(vec, idx, ng)))


def _l1_threshold(a: np.ndarray, radius: float) -> float:
    """``lam >= 0`` with ``sum max(a - lam, 0) = radius`` (``a >= 0``, ``sum a > radius``)."""
    s = np.sort(a)[::-1]
    css = np.cumsum(s)
    j = np.arange(1, s.size + 1)
    cond = s - (css - radius) / j > 0
    rho = int(np.nonzero(cond)[0][-1])
    return max((css[rho] - radius) / (rho + 1), 0.0)


def project_vec(vec: np.ndarray, radius: float, dims: Dims, beta_mode: str) -> np.ndarray:
    idx, ng = _groups(dims, beta_mode)
    norms = _group_norms(vec, idx, ng)
    total = float(norms.sum())
    if total <= radius:
        return vec
    lam = _l1_threshold(norms, radius)
    shrink = np.zeros(ng)
    nz = norms > lam
    shrink[nz] = 1.0 - lam / norms[nz]
    out = vec * shrink[idx]
    # rounding can leave the norm a hair above the radius; pull it inside
    excess = composite_norm_vec(out, dims, beta_mode)
    if excess > radius:
        out = out * (radius / excess)
    return out


def project_onto_ball(theta: PseudoLDS, radius: float) -> PseudoLDS:
    """Euclidean projection onto ``{composite_norm <= radius}``.

    Each group (an M or N phase slice, a beta entry or beta matrix, the whole P
    stack) is shrunk toward zero by a common amount ``lam`` in norm; ``lam``
    solves an l1-ball projection of the vector of group norms.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    vec = theta.to_vector()
    out = project_vec(vec, radius, theta.dims, theta.beta_mode)
    if out is vec:
        return theta
    return PseudoLDS.from_vector(out, theta.dims, theta.beta_mode)


# ---------------------------------------------------------------- FTRL

class _Objective:
    """``F`` and its gradient on flat vectors for a fixed state."""

    def __init__(self, state: LearnerState, eta: float):
        self.dims, self.mode = state.dims, state.beta_mode
        self.eta = eta
        self.exps = regularizer_exponents(self.dims.W, self.dims.tau)[:2]
        if state.uses_stats:
            self.G, self.b, self.c = state.G, state.b, state.c
            self.Phi = None
        else:
            self.Phi = np.concatenate(state.raw_phi, axis=0) if state.raw_phi else np.zeros((0, self.dims.size(self.mode)))
            self.Y = np.concatenate(state.raw_y) if state.raw_y else np.zeros(0)

    def _theta(self, v):
        return PseudoLDS.from_vector(v, self.dims, self.mode)

    def data_term(self, v) -> float:
        if self.Phi is None:
            return float(v @ (self.G @ v) - 2.0 * (self.b @ v) + self.c)
        r = self.Phi @ v - self.Y
        return float(r @ r)

    def value(self, v) -> float:
        return self.data_term(v) + regularizer(self._theta(v), self.exps) / self.eta

    def grad(self, v) -> np.ndarray:
        if self.Phi is None:
            g = 2.0 * (self.G @ v - self.b)
        else:
            g = 2.0 * (self.Phi.T @ (self.Phi @ v - self.Y))
        return g + regularizer_gradient(self._theta(v), self.exps).to_vector() / self.eta

    def curvature(self) -> np.ndarray:
        if self.Phi is None:
            return 2.0 * self.G
        return 2.0 * (self.Phi.T @ self.Phi)


def _random_feasible(count: int, D: int, radius: float, dims: Dims, mode: str, seed: int, t: int):
    rs = stream(seed, "ftrl-probe", t)
    out = []
    for i in range(count):
        z = rs.child(i).normal(D)
        scale = radius * rs.child(i, "r").uniform() / max(composite_norm_vec(z, dims, mode), 1e-300)
        out.append(z * scale)
    return out


def _solve(obj: _Objective, v0: np.ndarray, radius: float, config: LearnerConfig):
    """Monotone projected descent from ``v0``; returns ``(v, history, converged)``."""
    dims, mode = obj.dims, obj.mode
    v = v0
    f = obj.value(v)
    hist = [f]
    converged = False
    precond = None
    if config.inner_solver == "preconditioned":
        H = obj.curvature()
        D = H.shape[0]
        ridge = 2.0 / obj.eta + 1e-12 * max(float(np.trace(H)) / max(D, 1), 1.0)
        try:
            precond = np.linalg.inv(H + ridge * np.eye(D))
        except np.linalg.LinAlgError:
            precond = None
    step = 1.0
    lip = None
    for _ in range(config.inner_iters):
        g = obj.grad(v)
        accepted = False
        if precond is not None:
            d = precond @ g
            s = 1.0
            for _bt in range(30):
                cand = project_vec(v - s * d, radius, dims, mode)
                fc = obj.value(cand)
                if fc <= f - 1e-4 * float(g @ (v - cand)) and fc <= f:
                    accepted = True
                    break
                s *= 0.5
        if not accepted:
            # projected gradient with backtracking on the quadratic upper bound
            if lip is None:
                gn = float(np.linalg.norm(g))
                lip = 1.0 if gn == 0 else max(gn / max(np.linalg.norm(v), 1.0), 1e-12)
                step = 1.0 / lip
            for _bt in range(60):
                cand = project_vec(v - step * g, radius, dims, mode)
                diff = cand - v
                fc = obj.value(cand)
                if fc <= f + float(g @ diff) + float(diff @ diff) / (2.0 * step) and fc <= f:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                step *= 1.5
        if not accepted:
            converged = True  # no descent available at working precision
            break
        rel = (f - fc) / max(abs(f), 1e-300)
        v, f = cand, fc
        hist.append(f)
        if rel <= config.inner_tol:
            converged = True
            break
    return v, hist, converged


def ftrl_step(state: LearnerState, fv: FeatureVector, y_t, config: LearnerConfig) -> LearnerState:
    """Add ``(fv, y_t)`` to the leader objective and re-solve it over the ball."""
    if config.mode != "ftrl_theory":
        raise ValueError("ftrl_step requires mode='ftrl_theory'")
    dims, mode = state.dims, state.beta_mode
    y = np.asarray(y_t, dtype=np.float64)
    Phi = design_matrix(fv, mode)
    if state.uses_stats:
        state.G += Phi.T @ Phi
        state.b += Phi.T @ y
    else:
        state.raw_phi.append(Phi)
        state.raw_y.append(y)
    state.c += float(y @ y)
    state.t += 1

    eta = config.resolved_eta()
    radius = config.resolved_radius(dims, mode)
    obj = _Objective(state, eta)
    v_prev = state.theta.to_vector()
    v, hist, converged = _solve(obj, v_prev, radius, config)

    # probe set: the solution must beat zero and random feasible points
    probes = [np.zeros_like(v)]
    probes += _random_feasible(config.probe_points, v.size, radius, dims, mode, config.seed, state.t)
    f_best = hist[-1]
    swapped = False
    for z in probes:
        fz = obj.value(z)
        if fz < f_best:
            v, f_best, swapped = z, fz, True
    if swapped:
        v, more, conv2 = _solve(obj, v, radius, config)
        hist += more[1:]
        f_best = more[-1]
        converged = conv2
    state.theta = PseudoLDS.from_vector(v, dims, mode)
    norm = composite_norm_vec(v, dims, mode)
    diag = {
        "t": state.t,
        "objective": f_best,
        "composite_norm": norm,
        "radius": radius,
        "inner_iterations": len(hist) - 1,
        "converged": bool(converged),
        "probe_swap": swapped,
        "monotone": bool(all(b <= a for a, b in zip(hist, hist[1:]))),
        "flags": list(state.flags),
    }
    state.last = diag
    if not converged:
        log.warning("ftrl inner solver hit its budget", extra={"diagnostics": diag})
    log.debug("ftrl step", extra={"diagnostics": diag})
    return state


def ftrl_objective(state: LearnerState, theta: PseudoLDS, config: LearnerConfig) -> float:
    return _Objective(state, config.resolved_eta()).value(theta.to_vector())


# ---------------------------------------------------------------- practical

def step_size(config: LearnerConfig, t: int, fv: FeatureVector | None = None) -> float:
    """Step for round ``t`` (1-based)."""
    if config.step_schedule == "constant":
        return config.step_size
    if config.step_schedule == "inverse_sqrt":
        return config.step_size / math.sqrt(max(t, 1))
    energy = fv.energy() if fv is not None else 0.0
    return config.step_size / (2.0 * (config.norm_eps + energy))


def ridge_step(state: LearnerState, fv: FeatureVector, y_t, config: LearnerConfig) -> LearnerState:
    """``theta <- theta - s_t (grad loss + 2 lambda theta)``."""
    if config.mode != "ridge_practical":
        raise ValueError("ridge_step requires mode='ridge_practical'")
    g = gradient(state.theta, fv, y_t)
    state.t += 1
    s = step_size(config, state.t, fv)
    lam2 = 2.0 * config.ridge_lambda
    th = state.theta.to_vector()
    with np.errstate(over="ignore", invalid="ignore"):
        vec = th - s * (g.to_vector() + lam2 * th) if lam2 else th - s * g.to_vector()
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError("non-finite parameters after ridge step (step size too large?)")
    state.theta = PseudoLDS.from_vector(vec, state.theta.dims, state.theta.beta_mode)
    state.last = {"t": state.t, "step": s}
    return state


def learner_step(state: LearnerState, fv: FeatureVector, y_t, config: LearnerConfig) -> LearnerState:
    if config.mode == "ftrl_theory":
        return ftrl_step(state, fv, y_t, config)
    return ridge_step(state, fv, y_t, config)


# ---------------------------------------------------------------- regret

def regret_accounting(y_hat, y_true, y_star) -> float:
    """``sum |y_hat_t - y_t|^2 - sum |y*_t - y_t|^2``."""
    a = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y_true, dtype=np.float64)
    s = np.asarray(y_star, dtype=np.float64)
    if not (a.shape == y.shape == s.shape):
        raise ValueError(f"length mismatch: {a.shape}, {y.shape}, {s.shape}")
    return float(np.sum((a - y) ** 2) - np.sum((s - y) ** 2))
