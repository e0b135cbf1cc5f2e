"""Hankel matrix ``Z_T`` and the wave-filter bank built from its top eigenpairs.

The eigensolver is a cyclic Jacobi method applied with a round-robin pair
ordering, so every round rotates ``T/2`` disjoint coordinate planes at once.
For horizons above ``FULL_JACOBI_MAX`` (and ``k`` small against ``T``) the full
sweep becomes too slow, and the top of the spectrum is found instead by block
subspace iteration whose Rayleigh-Ritz matrices are diagonalised with the same
Jacobi routine.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .rng import stream

FULL_JACOBI_MAX = 128
JACOBI_TOL = 1e-14
TIE_RTOL = 1e-12


class EigensolverError(RuntimeError):
    """The iteration budget ran out before convergence."""


def hankel_entry(i: int, j: int) -> float:
    """Entry ``Z(i, j)`` for 1-based indices."""
    if i < 1 or j < 1:
        raise ValueError(f"indices are 1-based, got ({i}, {j})")
    s = i + j
    return 2.0 / (s ** 3 - s)


@dataclass(frozen=True)
class HankelMatrix:
    T: int
    entries: np.ndarray = field(repr=False)


def build_hankel(T: int) -> HankelMatrix:
    if T < 1:
        raise ValueError(f"horizon must be positive, got {T}")
    idx = np.arange(1, T + 1, dtype=np.float64)
    s = idx[:, None] + idx[None, :]
    Z = 2.0 / (s ** 3 - s)
    Z.setflags(write=False)
    return HankelMatrix(T=T, entries=Z)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``range(n)`` so each unordered pair appears once per sweep.

    Uses the circle method; for odd ``n`` a dummy index is added and dropped.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for a, b in zip(players[: m // 2], players[::-1][: m // 2]):
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 60):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` in the order the diagonal ends up
    in; eigenvectors are the columns of the second array.  Converged when the
    off-diagonal Frobenius mass is at most ``tol * ||S||_F``.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {A.shape}")
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return A.diagonal().copy(), V
    target = tol * fro
    skip = target / n
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= target:
            return A.diagonal().copy(), V
        for p, q in rounds:
            apq = A[p, q]
            # entries this small cannot move the off-diagonal mass above target
            active = np.abs(apq) > skip
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app = A[p, p]
            aqq = A[q, q]
            theta = (aqq - app) / (2.0 * apq)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap = A[p, :].copy()
            Aq = A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            Ap = A[:, p].copy()
            Aq = A[:, q]
            A[:, p] = Ap * c - Aq * s
            A[:, q] = Ap * s + Aq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp = V[:, p].copy()
            Vq = V[:, q]
            V[:, p] = Vp * c - Vq * s
            V[:, q] = Vp * s + Vq * c
    raise EigensolverError(f"Jacobi did not converge in {max_sweeps} sweeps (n={n})")


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for h in range(out.shape[1]):
        nz = np.flatnonzero(out[:, h])
        if nz.size and out[nz[0], h] < 0:
            out[:, h] = -out[:, h]
    return out


def _order_pairs(vals: np.ndarray, vecs: np.ndarray):
    """Descending order; near-equal eigenvalues are ordered by their vectors."""
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    out = []
    start = 0
    n = vals.size
    while start < n:
        stop = start + 1
        while stop < n and abs(vals[stop - 1] - vals[stop]) <= TIE_RTOL * max(abs(vals[stop - 1]), abs(vals[stop])):
            stop += 1
        group = list(range(start, stop))
        if len(group) > 1:
            group.sort(key=lambda g: tuple(-vecs[:, g]))
        out.extend(group)
        start = stop
    out = np.array(out)
    return vals[out], vecs[:, out]


def _subspace_top(Z: np.ndarray, k: int, max_iter: int = 500):
    T = Z.shape[0]
    b = min(T, k + 16)
    Q, _ = np.linalg.qr(stream(0, "hankel-subspace", T).normal((T, b)))
    for _ in range(max_iter):
        Q, _ = np.linalg.qr(Z @ Q)
        H = Q.T @ Z @ Q
        H = 0.5 * (H + H.T)
        vals, U = jacobi_eigh(H)
        order = np.argsort(-vals, kind="stable")
        vals, U = vals[order], U[:, order]
        Q = Q @ U
        R = Z @ Q[:, :k] - Q[:, :k] * vals[:k]
        if np.max(np.linalg.norm(R, axis=0)) <= 1e-13 * abs(vals[0]):
            return vals, Q
    raise EigensolverError(f"subspace iteration did not converge in {max_iter} steps (T={T}, k={k})")


@dataclass(frozen=True)
class FilterBank:
    """Top-``k`` eigenpairs of ``Z_T``.

    ``filters`` has shape ``(k, T)`` with unit rows; ``scaled_filters`` holds
    ``sigma_h ** 0.25 * phi_h``.  Eigenvalues below the double-precision floor
    ``eps * sigma_1`` are reported at that floor so the bank stays strictly
    positive and non-increasing.
    """

    T: int
    k: int
    eigenvalues: np.ndarray
    filters: np.ndarray = field(repr=False)
    scaled_filters: np.ndarray = field(repr=False)
    n_floored: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "k": self.k,
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "filters": [[float(v) for v in row] for row in self.filters],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FilterBank":
        doc = json.loads(text)
        vals = np.array(doc["eigenvalues"], dtype=np.float64)
        filt = np.array(doc["filters"], dtype=np.float64).reshape(doc["k"], doc["T"])
        return _make_bank(doc["T"], doc["k"], vals, filt)


def _make_bank(T, k, vals, filt, n_floored=0) -> FilterBank:
    vals = np.asarray(vals, dtype=np.float64).copy()
    filt = np.asarray(filt, dtype=np.float64).copy()
    scaled = filt * (vals ** 0.25)[:, None]
    for a in (vals, filt, scaled):
        a.setflags(write=False)
    return FilterBank(T=T, k=k, eigenvalues=vals, filters=filt, scaled_filters=scaled, n_floored=n_floored)


@lru_cache(maxsize=32)
def compute_filter_bank(T: int, k: int) -> FilterBank:
    """Wave-filters: the ``k`` leading eigenvectors of ``Z_T`` (cached)."""
    if k < 1 or k > T:
        raise ValueError(f"need 1 <= k <= T, got k={k}, T={T}")
    Z = build_hankel(T).entries
    if T <= FULL_JACOBI_MAX or 2 * (k + 16) >= T:
        vals, vecs = jacobi_eigh(Z)
    else:
        vals, vecs = _subspace_top(Z, k)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    vecs = _canonical_signs(vecs)
    vals, vecs = _order_pairs(vals, vecs)
    vals = vals[:k].copy()
    floor = np.finfo(np.float64).eps * vals[0]
    low = vals < floor
    vals[low] = floor
    return _make_bank(T, k, vals, vecs[:, :k].T, n_floored=int(low.sum()))


def filter_l1_diagnostic(bank: FilterBank) -> np.ndarray:
    """``||phi_h||_1 * sigma_h**(1/4)`` per filter."""
    return np.abs(bank.filters).sum(axis=1) * bank.eigenvalues ** 0.25
