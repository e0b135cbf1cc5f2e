"""Ground-truth linear dynamical systems.

    h_t = A h_{t-1} + B x_t + eta_t
    y_t = C h_t + D x_t + xi_t

Arrays are time-major throughout: an input sequence has shape ``(T, n)`` and
row ``t - 1`` holds ``x_t``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .rng import stream


@dataclass(frozen=True)
class LinearDynamicalSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    h0: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        d = A.shape[0]
        if A.shape != (d, d):
            raise ValueError(f"A must be square, got {A.shape}")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        if B.shape[0] != d or C.shape[1] != d:
            raise ValueError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        D = _as_matrix(self.D, "D")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        h0 = np.asarray(self.h0, dtype=np.float64).reshape(-1)
        if h0.shape != (d,):
            raise ValueError(f"h0 must have length {d}")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "h0", h0)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A)))) if self.d else 0.0

    def is_lyapunov_stable(self, tol: float = 1e-8) -> bool:
        return self.spectral_radius() <= 1.0 + tol

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "B", "C", "D", "h0")}

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearDynamicalSystem":
        A = np.asarray(doc["A"], dtype=np.float64)
        B = np.asarray(doc["B"], dtype=np.float64)
        C = np.asarray(doc["C"], dtype=np.float64)
        D = doc.get("D")
        D = np.zeros((C.shape[0], B.shape[1])) if D is None else np.asarray(D, dtype=np.float64)
        h0 = doc.get("h0")
        h0 = np.zeros(A.shape[0]) if h0 is None else np.asarray(h0, dtype=np.float64)
        return cls(A=A, B=B, C=C, D=D, h0=h0)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_matrix(a, name) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemBounds:
    """Declared size parameters of an LDS and its phase polynomial."""

    R_x: float
    R_y: float
    R_Theta: float
    R_Psi: float
    R_1: float
    R_inf: float
    p_coeffs: tuple = (1.0,)

    @property
    def tau(self) -> int:
        return len(self.p_coeffs) - 1

    def __post_init__(self):
        c = np.asarray(self.p_coeffs, dtype=np.float64)
        if c.size == 0 or c[0] != 1.0:
            raise ValueError("phase polynomial must be monic (leading coefficient 1)")
        if np.sum(np.abs(c)) > self.R_1 + 1e-12:
            raise ValueError(f"||p||_1 = {np.sum(np.abs(c))} exceeds R_1 = {self.R_1}")
        if np.max(np.abs(c)) > self.R_inf + 1e-12:
            raise ValueError(f"||p||_inf = {np.max(np.abs(c))} exceeds R_inf = {self.R_inf}")


@dataclass(frozen=True)
class NoiseSchedule:
    eta: np.ndarray = field(repr=False)  # (T, d)
    xi: np.ndarray = field(repr=False)  # (T, m)
    budget: float = 0.0
    pattern: str = "spread"

    def __post_init__(self):
        spent = self.spent()
        if spent > self.budget + 1e-9:
            raise ValueError(f"noise energy {spent} exceeds budget {self.budget}")

    def spent(self) -> float:
        return float(np.sum(self.eta ** 2) + np.sum(self.xi ** 2))

    @classmethod
    def zeros(cls, T: int, d: int, m: int) -> "NoiseSchedule":
        return cls(eta=np.zeros((T, d)), xi=np.zeros((T, m)), budget=0.0, pattern="none")

    def metadata(self) -> dict:
        return {"pattern": self.pattern, "budget": self.budget, "spent": self.spent()}


def step(system: LinearDynamicalSystem, h_prev, x_t, eta_t=None, xi_t=None):
    """One transition; returns ``(h_t, y_t)``."""
    h = system.A @ h_prev + system.B @ np.asarray(x_t, dtype=np.float64)
    if eta_t is not None:
        h = h + eta_t
    y = system.C @ h + system.D @ x_t
    if xi_t is not None:
        y = y + xi_t
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(y))):
        raise FloatingPointError("non-finite state or output")
    return h, y


def fold_initial_state(system: LinearDynamicalSystem, noise: NoiseSchedule):
    """Move ``h0`` into the first hidden-state perturbation.

    Returns a system with ``h0 = 0`` and a schedule whose ``eta_1`` absorbs
    ``A h0``; both produce the same outputs as the original pair.  The budget
    grows by whatever energy the fold adds.
    """
    eta = noise.eta.copy()
    if eta.shape[0]:
        eta[0] = eta[0] + system.A @ system.h0
    spent = float(np.sum(eta ** 2) + np.sum(noise.xi ** 2))
    folded = NoiseSchedule(eta=eta, xi=noise.xi.copy(), budget=max(noise.budget, spent),
                           pattern=noise.pattern + "+h0")
    zero_sys = LinearDynamicalSystem(system.A, system.B, system.C, system.D, np.zeros(system.d))
    return zero_sys, folded


def simulate(system: LinearDynamicalSystem, inputs, noise: NoiseSchedule | None = None):
    """Run the recursion over ``inputs`` (shape ``(T, n)``).

    Returns ``(outputs, hidden)`` with shapes ``(T, m)`` and ``(T, d)``.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != system.n:
        raise ValueError(f"inputs must have shape (T, {system.n}), got {x.shape}")
    T = x.shape[0]
    if noise is not None and (noise.eta.shape != (T, system.d) or noise.xi.shape != (T, system.m)):
        raise ValueError("noise schedule does not match the horizon and system dimensions")
    ys = np.empty((T, system.m))
    hs = np.empty((T, system.d))
    h = system.h0
    for t in range(T):
        eta_t = None if noise is None else noise.eta[t]
        xi_t = None if noise is None else noise.xi[t]
        h, ys[t] = step(system, h, x[t], eta_t, xi_t)
        hs[t] = h
    return ys, hs


def rotation_block(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_rotation_lds(d: int = 10, n: int = 10, m: int = 2, seed: int = 0, radius=1.0) -> LinearDynamicalSystem:
    """Block-diagonal LDS of 2x2 rotations with Gaussian ``B`` and ``C``.

    Angles are uniform on [0, 2 pi).  ``radius`` scales each block (a scalar
    or one value per block); the default 1 gives pure rotations.
    """
    if d % 2:
        raise ValueError(f"d must be even, got {d}")
    rs = stream(seed, "rotation-lds")
    thetas = 2.0 * np.pi * (1.0 - rs.child("theta").uniform(d // 2))
    radii = np.broadcast_to(np.asarray(radius, dtype=np.float64), (d // 2,))
    A = np.zeros((d, d))
    for b, (th, r) in enumerate(zip(thetas, radii)):
        A[2 * b: 2 * b + 2, 2 * b: 2 * b + 2] = r * rotation_block(th)
    B = rs.child("B").normal((d, n))
    C = rs.child("C").normal((m, d))
    return LinearDynamicalSystem(A=A, B=B, C=C, D=np.zeros((m, n)), h0=np.zeros(d))


def gaussian_inputs(T: int, n: int, seed: int = 0) -> np.ndarray:
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    return stream(seed, "gaussian-inputs").normal((T, n))


def block_impulse_inputs(T: int, n: int, block_len: int = 10, gap: float = 40, seed: int = 0) -> np.ndarray:
    """Held Gaussian vectors over blocks of ``block_len`` steps, zeros in between.

    ``gap=float('inf')`` gives a single block at the start.
    """
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    if block_len < 1:
        raise ValueError("block_len must be positive")
    rs = stream(seed, "block-impulse-inputs")
    x = np.zeros((T, n))
    if np.isinf(gap):
        x[: min(block_len, T)] = rs.normal(n)
        return x
    gap = int(gap)
    period = block_len + gap
    for start in range(0, T, period):
        x[start: min(start + block_len, T)] = rs.normal(n)
    return x


@dataclass(frozen=True)
class Diagonalization:
    Psi: np.ndarray
    eigenvalues: np.ndarray
    Psi_inv: np.ndarray

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @property
    def phases(self) -> np.ndarray:
        """Unit-modulus phases; zero eigenvalues get phase 1."""
        r = self.moduli
        out = np.ones_like(self.eigenvalues)
        nz = r > 0
        out[nz] = self.eigenvalues[nz] / r[nz]
        return out

    @property
    def conditioning(self) -> float:
        return float(np.linalg.norm(self.Psi) * np.linalg.norm(self.Psi_inv))

    def reconstruct(self) -> np.ndarray:
        return (self.Psi * self.eigenvalues) @ self.Psi_inv


class DefectiveMatrixError(ValueError):
    pass


def diagonalize(A, tol: float = 1e-8, imag_tol: float = 1e-12) -> Diagonalization:
    """``A = Psi diag(lambda) Psi^{-1}`` with conjugate pairs adjacent.

    Real eigenvalues come first in their original order, then each complex
    pair as (upper half-plane, conjugate).  The conjugate's eigenvector is set
    to the exact conjugate of its partner's.
    """
    A = np.asarray(A, dtype=np.float64)
    vals, vecs = np.linalg.eig(A)
    d = vals.size
    scale = max(np.max(np.abs(vals)), 1.0) if d else 1.0
    is_real = np.abs(vals.imag) <= imag_tol * scale
    real_idx = [i for i in range(d) if is_real[i]]
    upper = [i for i in range(d) if not is_real[i] and vals[i].imag > 0]
    lower = [i for i in range(d) if not is_real[i] and vals[i].imag < 0]
    if len(upper) != len(lower):
        raise DefectiveMatrixError("complex eigenvalues are not closed under conjugation")
    ordered_vals, ordered_vecs = [], []
    for i in real_idx:
        v = vecs[:, i].real
        ordered_vals.append(complex(vals[i].real, 0.0))
        ordered_vecs.append(_canonical_vector(v.astype(complex)))
    used = set()
    for i in upper:
        j = min((j for j in lower if j not in used), key=lambda j: abs(vals[j] - np.conj(vals[i])))
        used.add(j)
        v = _canonical_vector(vecs[:, i])
        ordered_vals += [vals[i], np.conj(vals[i])]
        ordered_vecs += [v, np.conj(v)]
    lam = np.array(ordered_vals, dtype=complex)
    Psi = np.column_stack(ordered_vecs) if d else np.zeros((0, 0), dtype=complex)
    try:
        Psi_inv = np.linalg.inv(Psi)
    except np.linalg.LinAlgError as exc:
        raise DefectiveMatrixError("eigenvector matrix is singular") from exc
    diag = Diagonalization(Psi=Psi, eigenvalues=lam, Psi_inv=Psi_inv)
    resid = np.linalg.norm(diag.reconstruct() - A)
    if resid > tol * max(np.linalg.norm(A), 1.0):
        raise DefectiveMatrixError(f"reconstruction residual {resid:.3e} exceeds tolerance (near-defective A)")
    return diag


def _canonical_vector(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v) > np.max(np.abs(v)) * (1 - 1e-12)))
    return v * (abs(v[k]) / v[k])


def make_noise_schedule(T: int, d: int, m: int, budget: float, pattern: str = "spread", u: int | None = None,
                        seed: int = 0) -> NoiseSchedule:
    """Perturbations ``eta`` (hidden) and ``xi`` (observation) with total energy ``budget``.

    ``pattern`` is ``"spread"`` (Gaussian draws over every step, rescaled to
    spend the whole budget), ``"single_spike_hidden"`` or ``"single_spike_obs"``
    (one perturbation of squared norm ``budget`` at 1-based step ``u``).
    """
    if budget < 0:
        raise ValueError("noise budget must be non-negative")
    eta = np.zeros((T, d))
    xi = np.zeros((T, m))
    if budget == 0:
        return NoiseSchedule(eta=eta, xi=xi, budget=0.0, pattern=pattern)
    rs = stream(seed, "noise", pattern)
    if pattern == "spread":
        eta = rs.child("eta").normal((T, d))
        xi = rs.child("xi").normal((T, m))
        energy = np.sum(eta ** 2) + np.sum(xi ** 2)
        scale = np.sqrt(budget / energy)
        eta *= scale
        xi *= scale
    elif pattern in ("single_spike_hidden", "single_spike_obs"):
        if u is None or not 1 <= u <= T:
            raise ValueError(f"spike step u must lie in [1, {T}]")
        target = eta if pattern == "single_spike_hidden" else xi
        v = rs.child("direction").normal(target.shape[1])
        target[u - 1] = v * (np.sqrt(budget) / np.linalg.norm(v))
    else:
        raise ValueError(f"unknown noise pattern {pattern!r}")
    return NoiseSchedule(eta=eta, xi=xi, budget=float(budget), pattern=pattern)


def validate_bounds(system: LinearDynamicalSystem, bounds: SystemBounds, inputs=None, outputs=None,
                    phase_tol: float = 1e-8) -> dict:
    """Check the size assumptions; returns ``{name: {"pass": bool, "value": ...}}``."""
    report = {}
    if inputs is not None:
        v = float(np.max(np.linalg.norm(np.asarray(inputs), axis=1))) if len(inputs) else 0.0
        report["input_bound"] = {"pass": v <= bounds.R_x, "value": v, "bound": bounds.R_x}
    if outputs is not None:
        v = float(np.max(np.linalg.norm(np.asarray(outputs), axis=1))) if len(outputs) else 0.0
        report["output_bound"] = {"pass": v <= bounds.R_y, "value": v, "bound": bounds.R_y}
    rho = system.spectral_radius()
    report["lyapunov_stable"] = {"pass": rho <= 1.0 + 1e-8, "value": rho, "bound": 1.0}
    try:
        diag = diagonalize(system.A)
        cond = diag.conditioning
        report["diagonalizable"] = {"pass": cond <= bounds.R_Psi, "value": cond, "bound": bounds.R_Psi}
        p = np.asarray(bounds.p_coeffs, dtype=np.float64)
        resid = float(np.max(np.abs(np.polyval(p, diag.phases)))) if diag.eigenvalues.size else 0.0
        report["phase_polynomial"] = {"pass": resid <= phase_tol, "value": resid, "bound": phase_tol}
    except DefectiveMatrixError as exc:
        report["diagonalizable"] = {"pass": False, "value": float("inf"), "bound": bounds.R_Psi, "error": str(exc)}
        report["phase_polynomial"] = {"pass": False, "value": float("nan"), "bound": phase_tol}
    norms = {name: float(np.linalg.norm(getattr(system, name), 2)) if getattr(system, name).size else 0.0
             for name in "BCD"}
    report["operator_norms"] = {"pass": max(norms.values()) <= bounds.R_Theta, "value": norms,
                                "bound": bounds.R_Theta}
    return report


def random_stable_lds(d: int, n: int, m: int, seed: int = 0, max_radius: float = 0.95, min_radius: float = 0.2,
                      min_gap: float = 0.1, max_cond: float = 10.0) -> LinearDynamicalSystem:
    """Diagonalizable ``A`` with well-separated eigenvalues of modulus in ``[min_radius, max_radius]``.

    The spectrum mixes real eigenvalues and conjugate pairs; ``A = S J S^{-1}``
    with ``J`` in real block-diagonal form and ``S`` a Gaussian perturbation
    of the identity whose condition number is at most ``max_cond``.
    """
    rs = stream(seed, "stable-lds", d, n, m)
    for attempt in range(1000):
        r = rs.child(attempt)
        pairs = int(r.child("pairs").uniform() * (d // 2 + 1)) if d >= 2 else 0
        pairs = min(pairs, d // 2)
        n_real = d - 2 * pairs
        rad = min_radius + (max_radius - min_radius) * r.child("moduli").uniform(n_real + pairs)
        sign = np.where(r.child("signs").uniform(n_real) < 0.5, -1.0, 1.0)
        reals = rad[:n_real] * sign
        ang = 0.2 + (np.pi - 0.4) * r.child("angles").uniform(pairs)
        comp = rad[n_real:] * np.exp(1j * ang)
        eig = np.concatenate([reals.astype(complex), comp, np.conj(comp)])
        gaps = np.abs(eig[:, None] - eig[None, :]) + np.eye(d) * 10
        if d > 1 and gaps.min() < min_gap:
            continue
        J = np.zeros((d, d))
        for i, v in enumerate(reals):
            J[i, i] = v
        for b, (rr, th) in enumerate(zip(rad[n_real:], ang)):
            i = n_real + 2 * b
            J[i: i + 2, i: i + 2] = rr * rotation_block(th)
        S = np.eye(d) + 0.3 * r.child("basis").normal((d, d)) / np.sqrt(max(d, 1))
        if np.linalg.cond(S) > max_cond:
            continue
        A = S @ J @ np.linalg.inv(S)
        B = r.child("B").normal((d, n))
        C = r.child("C").normal((m, d))
        return LinearDynamicalSystem(A=A, B=B, C=C, D=np.zeros((m, n)), h0=np.zeros(d))
    raise RuntimeError("could not draw a well-separated stable system")
