"""Constructive maps from a known LDS to predictor parameters.

Both compilers start from a monic polynomial ``p(x) = sum_j e_j x^{tau-j}``
(``e_0 = 1``) and the identity

    sum_j e_j y_{t-j} = sum_{i<tau} P_i x_{t-i} + sum_{i>=tau} C A^{i-tau} p(A) B x_{t-i}

with ``P_i = sum_{j<=i} e_j C A^{i-j} B``.  When ``p`` annihilates the whole
spectrum the tail vanishes (autoregressive compiler).  When it only
annihilates the eigenvalue phases, each eigenvalue ``r w`` leaves a tail
proportional to ``p(r w)`` and geometric in ``r``, which the wave-filters
compress and the phase grid ``2 pi p / W`` absorbs (wave-filter compiler).

The pseudo-LDS autoregressive weights are ``beta_u = -e_u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hankel import FilterBank
from .lds import LinearDynamicalSystem, diagonalize, gaussian_inputs, simulate
from .pseudo_lds import FeatureMap, PseudoLDS, composite_norm, default_lag_offset, predict_sequence

PHASE_TOL = 1e-8
IMAG_TOL = 1e-10
NEAR_ONE = 1e-6


class PhaseCheckError(ValueError):
    """The polynomial does not vanish where it is required to."""


@dataclass(frozen=True)
class PhasePolynomial:
    coeffs: tuple
    roots_checked: tuple = ()

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if not c or c[0] != 1.0:
            raise ValueError("phase polynomial must be monic")
        object.__setattr__(self, "coeffs", c)
        for w in self.roots_checked:
            if abs(self(w)) > PHASE_TOL:
                raise PhaseCheckError(f"|p({w})| = {abs(self(w)):.3e} exceeds {PHASE_TOL}")

    @property
    def tau(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return np.polyval(np.array(self.coeffs), z)


def _dedupe(values, tol):
    out = []
    for v in values:
        if all(abs(v - w) > tol for w in out):
            out.append(v)
    return out


def min_phase_polynomial(phases, tol: float = 1e-9) -> PhasePolynomial:
    """Monic real polynomial whose roots are exactly the given phases and their conjugates."""
    ph = [complex(w) for w in np.atleast_1d(np.asarray(list(phases), dtype=complex))]
    for w in ph:
        if abs(abs(w) - 1.0) > 1e-8:
            raise ValueError(f"phase {w} is not on the unit circle")
    # snap near-real phases so real roots stay real
    ph = [complex(w.real, 0.0) if abs(w.imag) <= tol else w for w in ph]
    roots = _dedupe(ph + [w.conjugate() for w in ph], tol)
    coeffs = np.poly(np.array(roots)) if roots else np.array([1.0])
    if np.max(np.abs(np.imag(coeffs))) > 1e-9:
        raise ValueError("roots are not closed under conjugation")
    return PhasePolynomial(tuple(np.real(coeffs)), tuple(roots))


def characteristic_polynomial(A) -> PhasePolynomial:
    """Monic characteristic polynomial of ``A`` (annihilates every eigenvalue)."""
    A = np.asarray(A, dtype=np.float64)
    return PhasePolynomial(tuple(np.real(np.poly(A))) if A.size else (1.0,))


def mu_vector(r: float, T: int) -> np.ndarray:
    """``((1 - r) r^{t-1})_{t=1..T}``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    out = np.zeros(T)
    if r == 0.0:
        out[0] = 1.0
        return out
    out[:] = (1.0 - r) * r ** np.arange(T, dtype=np.float64)
    return out


def markov_parameters(system: LinearDynamicalSystem, count: int) -> np.ndarray:
    """``C A^i B`` for ``i = 0..count-1``, shape ``(count, m, n)``."""
    out = np.zeros((count, system.m, system.n))
    AkB = system.B.copy()
    for i in range(count):
        out[i] = system.C @ AkB
        AkB = system.A @ AkB
    return out


def _input_lag_matrices(system: LinearDynamicalSystem, e: np.ndarray) -> np.ndarray:
    tau = e.size - 1
    G = markov_parameters(system, tau)
    P = np.zeros((tau, system.m, system.n))
    for j in range(tau):
        for i in range(j + 1):
            P[j] += e[i] * G[j - i]
        P[j] += e[j] * system.D
    if tau and np.any(e[tau] * system.D != 0.0):
        raise ValueError("D enters at lag tau, which has no input matrix; need D = 0 or p(0) = 0")
    return P


def ar_compile(system: LinearDynamicalSystem, p: PhasePolynomial, rtol: float = 1e-8):
    """Exact autoregressive predictor for a system whose spectrum ``p`` annihilates.

    Returns ``(beta, P)`` with ``beta`` the ``tau`` pseudo-LDS weights
    ``-e_1..-e_tau`` and ``P`` of shape ``(tau, m, n)``.  A zero-degree ``p``
    (only possible for ``d = 0``) has no lags to carry ``D``.
    """
    e = np.array(p.coeffs)
    eig = np.linalg.eigvals(system.A) if system.d else np.zeros(0)
    scale = max(1.0, float(np.sum(np.abs(e))))
    resid = float(np.max(np.abs(p(eig)))) if eig.size else 0.0
    if resid > rtol * scale:
        raise PhaseCheckError(f"p does not annihilate the spectrum of A (max |p(alpha)| = {resid:.3e})")
    if e.size == 1:
        raise ValueError("ar_compile needs tau >= 1")
    return -e[1:].copy(), _input_lag_matrices(system, e)


def ar_theta(system: LinearDynamicalSystem, p: PhasePolynomial, W: int = 1, k: int = 1) -> PseudoLDS:
    """The autoregressive compile packed into a pseudo-LDS with ``M = N = 0``."""
    beta, P = ar_compile(system, p)
    tau = beta.size
    return PseudoLDS(M=np.zeros((W, k, system.m, system.n)), N=np.zeros((W, k, system.m, system.n)),
                     beta=beta, P=P)


@dataclass(frozen=True)
class CompiledApprox:
    theta: PseudoLDS
    lag_offset: int
    report: dict = field(default_factory=dict)


def _geometric_ratio(r: float, s: int) -> float:
    """``(r^s - 1) / (1 - r)``, i.e. ``-(1 + r + ... + r^{s-1})``."""
    if abs(1.0 - r) < NEAR_ONE:
        return -float(np.sum(r ** np.arange(s)))
    return (r ** s - 1.0) / (1.0 - r)


def _pick_phase(alpha: complex, p: PhasePolynomial) -> complex:
    """Phase of ``alpha``; for ``alpha = 0`` any root of ``p`` on the unit circle."""
    r = abs(alpha)
    if r > 0:
        return alpha / r
    roots = np.roots(np.array(p.coeffs)) if p.tau else np.zeros(0)
    on_circle = [z for z in roots if abs(abs(z) - 1.0) < 1e-6]
    if not on_circle:
        raise PhaseCheckError("zero eigenvalue needs a unit-modulus root of p")
    # prefer a real root so the conjugate pairing stays trivial
    on_circle.sort(key=lambda z: (abs(z.imag) > 1e-9, -z.real))
    z = on_circle[0]
    return complex(z.real, 0.0) if abs(z.imag) <= 1e-9 else z / abs(z)


def phase_bucket(omega: complex, W: int) -> int:
    theta = float(np.angle(omega))
    return int(np.round(W * theta / (2.0 * np.pi))) % W


def wavefilter_compile(system: LinearDynamicalSystem, p: PhasePolynomial, bank: FilterBank, W: int,
                       lag_offset: int | None = None, validation_inputs=None, validation_seed: int = 0,
                       validation_T: int | None = None) -> CompiledApprox:
    """Pseudo-LDS whose wave-filter block stands in for the slowly decaying tail.

    For each eigenvalue ``alpha = r w`` with eigenvectors ``v`` (right) and
    ``w*`` (left) the tail is ``sum_{u>=1} G (1-r) r^{u-1} w^u x_{t-L-u}`` with
    ``G = C v w* B p(alpha) / ((1 - r) w)`` and ``L = tau - 1``.  Projecting
    ``mu(r)`` on the filters and rounding ``w`` to the phase grid gives the
    complex block ``G m_h``, whose real and negated imaginary parts land in
    ``M`` and ``N`` at the bucket of ``w``.

    The returned report carries the max prediction error over a noiseless
    validation trace (fresh Gaussian inputs unless given).
    """
    if W < 1:
        raise ValueError("W must be >= 1")
    e = np.array(p.coeffs)
    tau = p.tau
    if tau < 1:
        raise ValueError("wavefilter_compile needs tau >= 1")
    L = default_lag_offset(tau) if lag_offset is None else int(lag_offset)
    if L != default_lag_offset(tau):
        raise ValueError(f"the construction is exact only for lag offset {default_lag_offset(tau)}, got {L}")
    diag = diagonalize(system.A)
    phases = np.array([_pick_phase(a, p) for a in diag.eigenvalues])
    phase_resid = float(np.max(np.abs(p(phases)))) if phases.size else 0.0
    if phase_resid > PHASE_TOL * max(1.0, float(np.sum(np.abs(e)))):
        raise PhaseCheckError(f"p does not vanish on the eigenvalue phases (max |p(w)| = {phase_resid:.3e})")

    k, m, n = bank.k, system.m, system.n
    Mc = np.zeros((W, k, m, n), dtype=complex)
    buckets, bucket_gaps = [], []
    for ell, alpha in enumerate(diag.eigenvalues):
        r = float(abs(alpha))
        omega = phases[ell]
        if r > 1.0 + 1e-12:
            raise ValueError("wavefilter_compile needs a Lyapunov-stable A")
        r = min(r, 1.0)
        # p(r w) = sum_j e_j w^{tau-j} (r^{tau-j} - 1) since p(w) = 0, so
        # p(r w) / (1 - r) stays bounded as r -> 1
        ratio = sum(e[j] * omega ** (tau - j) * _geometric_ratio(r, tau - j) for j in range(tau + 1))
        G = np.outer(system.C @ diag.Psi[:, ell], diag.Psi_inv[ell] @ system.B) * ratio / omega
        mu = mu_vector(r, bank.T)
        mh = (bank.filters @ mu) * bank.eigenvalues ** -0.25
        pb = phase_bucket(omega, W)
        buckets.append(pb)
        gap = float(np.angle(omega)) - 2.0 * np.pi * pb / W
        bucket_gaps.append(abs((gap + np.pi) % (2.0 * np.pi) - np.pi))
        Mc[pb] += mh[:, None, None] * G[None, :, :]

    # conjugate eigenvalues land in buckets p and -p mod W with conjugate
    # blocks; anything else means the spectrum was not conjugate-closed
    mirror = np.conj(Mc[(-np.arange(W)) % W])
    imag_residue = float(np.max(np.abs(Mc - mirror))) if Mc.size else 0.0
    if imag_residue > IMAG_TOL * max(1.0, float(np.max(np.abs(Mc)))):
        raise ValueError(f"compiled blocks are not conjugate-symmetric (residue {imag_residue:.3e})")
    M, N = np.real(Mc), -np.imag(Mc)
    P = _input_lag_matrices(system, e)
    theta = PseudoLDS(M=M, N=N, beta=-e[1:].copy(), P=P)

    fmap = FeatureMap(bank, W, tau, L)
    if validation_inputs is None:
        Tv = validation_T or bank.T
        validation_inputs = gaussian_inputs(Tv, n, seed=validation_seed)
    x = np.asarray(validation_inputs, dtype=np.float64)
    ys, _ = simulate(LinearDynamicalSystem(system.A, system.B, system.C, system.D, np.zeros(system.d)), x)
    yhat = predict_sequence(theta, fmap, x, ys)
    err = np.linalg.norm(yhat - ys, axis=1)
    report = {
        "k": k, "W": W, "tau": tau, "lag_offset": L, "horizon": bank.T,
        "validation_T": int(x.shape[0]),
        "max_error": float(np.max(err)) if err.size else 0.0,
        "mean_sq_error": float(np.mean(err ** 2)) if err.size else 0.0,
        "max_abs_output": float(np.max(np.abs(ys))) if ys.size else 0.0,
        "composite_norm": composite_norm(theta),
        "wave_norm": float(np.sqrt(_l21(M) ** 2 + _l21(N) ** 2)),
        "phase_buckets": buckets,
        "max_bucket_gap": max(bucket_gaps) if bucket_gaps else 0.0,
        "p_coeffs": [float(v) for v in e],
        "imag_residue": imag_residue,
    }
    return CompiledApprox(theta=theta, lag_offset=L, report=report)


def _l21(X) -> float:
    return float(np.sum(np.sqrt(np.sum(X.reshape(X.shape[0], -1) ** 2, axis=1))))
