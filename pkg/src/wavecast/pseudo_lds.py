"""Pseudo-LDS parameters and their prediction map.

A pseudo-LDS ``(M, N, beta, P)`` predicts

    y_hat_t = sum_u beta_u y_{t-u} + sum_j P_j x_{t-j}
              + sum_{p,h,i} M[p,h,:,i] C[p,h,i] + N[p,h,:,i] S[p,h,i]

where ``C`` and ``S`` are phase-modulated wave-filter convolutions of the input
history,

    C[p,h,i] = sum_{u=1}^{T} sigma_h^{1/4} phi_h(u) cos(2 pi u p / W) x_{t-L-u}(i)

and ``S`` uses ``sin``.  ``L`` is the lag offset of the convolution window.
Tensor layout: ``M`` and ``N`` are ``(W, k, m, n)``, ``beta`` is ``(tau,)`` in
scalar mode or ``(tau, m, m)`` in matrix mode, ``P`` is ``(tau, m, n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hankel import FilterBank


@dataclass(frozen=True)
class Dims:
    W: int
    k: int
    n: int
    m: int
    tau: int

    def __post_init__(self):
        for name in ("W", "k", "n", "m", "tau"):
            if getattr(self, name) < 1:
                raise ValueError(f"dimension {name} must be >= 1, got {getattr(self, name)}")

    def shapes(self, beta_mode: str = "scalar") -> dict:
        beta = (self.tau,) if beta_mode == "scalar" else (self.tau, self.m, self.m)
        return {
            "M": (self.W, self.k, self.m, self.n),
            "N": (self.W, self.k, self.m, self.n),
            "beta": beta,
            "P": (self.tau, self.m, self.n),
        }

    def size(self, beta_mode: str = "scalar") -> int:
        return sum(int(np.prod(s)) for s in self.shapes(beta_mode).values())

    def as_dict(self) -> dict:
        return {"W": self.W, "k": self.k, "n": self.n, "m": self.m, "tau": self.tau}


BLOCKS = ("M", "N", "beta", "P")


@dataclass(frozen=True)
class PseudoLDS:
    M: np.ndarray
    N: np.ndarray
    beta: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        arrs = {b: np.asarray(getattr(self, b), dtype=np.float64) for b in BLOCKS}
        if arrs["M"].ndim != 4:
            raise ValueError(f"M must be a 4-tensor, got shape {arrs['M'].shape}")
        W, k, m, n = arrs["M"].shape
        tau = arrs["P"].shape[0] if arrs["P"].ndim == 3 else -1
        dims = Dims(W, k, n, m, tau)
        mode = "scalar" if arrs["beta"].ndim == 1 else "matrix"
        for b, shape in dims.shapes(mode).items():
            if arrs[b].shape != shape:
                raise ValueError(f"{b} has shape {arrs[b].shape}, expected {shape}")
        for b in BLOCKS:
            if not np.all(np.isfinite(arrs[b])):
                raise ValueError(f"{b} has non-finite entries")
            object.__setattr__(self, b, arrs[b])

    @property
    def dims(self) -> Dims:
        W, k, m, n = self.M.shape
        return Dims(W, k, n, m, self.P.shape[0])

    @property
    def beta_mode(self) -> str:
        return "scalar" if self.beta.ndim == 1 else "matrix"

    @classmethod
    def zeros(cls, dims: Dims, beta_mode: str = "scalar") -> "PseudoLDS":
        if beta_mode not in ("scalar", "matrix"):
            raise ValueError(f"beta_mode must be 'scalar' or 'matrix', got {beta_mode!r}")
        return cls(**{b: np.zeros(s) for b, s in dims.shapes(beta_mode).items()})

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, b).ravel() for b in BLOCKS])

    @classmethod
    def from_vector(cls, vec, dims: Dims, beta_mode: str = "scalar") -> "PseudoLDS":
        vec = np.asarray(vec, dtype=np.float64)
        parts, pos = {}, 0
        for b, shape in dims.shapes(beta_mode).items():
            size = int(np.prod(shape))
            parts[b] = vec[pos: pos + size].reshape(shape)
            pos += size
        if pos != vec.size:
            raise ValueError(f"vector has {vec.size} entries, expected {pos}")
        return cls(**parts)

    def scaled(self, c: float) -> "PseudoLDS":
        return PseudoLDS(*(c * getattr(self, b) for b in BLOCKS))

    def __add__(self, other: "PseudoLDS") -> "PseudoLDS":
        return PseudoLDS(*(getattr(self, b) + getattr(other, b) for b in BLOCKS))

    def __sub__(self, other: "PseudoLDS") -> "PseudoLDS":
        return PseudoLDS(*(getattr(self, b) - getattr(other, b) for b in BLOCKS))

    def to_dict(self) -> dict:
        doc = {"dims": self.dims.as_dict(), "beta_mode": self.beta_mode}
        for b in BLOCKS:
            doc[b] = [float(v) for v in getattr(self, b).ravel()]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PseudoLDS":
        dims = Dims(**doc["dims"])
        mode = doc.get("beta_mode", "scalar")
        shapes = dims.shapes(mode)
        return cls(**{b: np.array(doc[b], dtype=np.float64).reshape(shapes[b]) for b in BLOCKS})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PseudoLDS":
        return cls.from_dict(json.loads(text))


class CausalityError(LookupError):
    """A predictor asked for an output it is not allowed to see yet."""


class SeriesHistory:
    """Append-only record of ``x_1..x_t`` and ``y_1..y_{t-1}``.

    Inputs are pushed before the prediction at step ``t``; the output
    ``y_t`` only becomes visible after :meth:`observe`.
    """

    def __init__(self, n: int, m: int, capacity: int = 1024):
        self.n, self.m = n, m
        self._x = np.zeros((max(capacity, 1), n))
        self._y = np.zeros((max(capacity, 1), m))
        self.t = 0
        self._n_obs = 0

    @classmethod
    def from_arrays(cls, inputs, outputs) -> "SeriesHistory":
        """History at step ``t = len(inputs)``; needs ``len(outputs) >= t - 1``.

        Only ``outputs[:t-1]`` are retained.
        """
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        y = np.asarray(outputs, dtype=np.float64)
        if y.ndim != 2:
            y = y.reshape(-1, 1) if y.size else np.zeros((0, 1))
        m = y.shape[1]
        hist = cls(x.shape[1], m, capacity=x.shape[0])
        for s in range(x.shape[0]):
            hist.push_input(x[s])
            if s < x.shape[0] - 1:
                hist.observe(y[s])
        return hist

    def _grow(self):
        cap = 2 * self._x.shape[0]
        for name in ("_x", "_y"):
            old = getattr(self, name)
            new = np.zeros((cap, old.shape[1]))
            new[: old.shape[0]] = old
            setattr(self, name, new)

    def push_input(self, x_t):
        if self._n_obs != self.t:
            raise CausalityError(f"y_{self.t} must be observed before x_{self.t + 1} is pushed")
        if self.t == self._x.shape[0]:
            self._grow()
        self._x[self.t] = x_t
        self.t += 1

    def observe(self, y_t):
        if self._n_obs != self.t - 1:
            raise CausalityError("observe() must follow push_input() exactly once")
        self._y[self._n_obs] = y_t
        self._n_obs += 1

    @property
    def inputs(self) -> np.ndarray:
        """Read-only view of ``x_1..x_t`` (row ``s - 1`` is ``x_s``)."""
        v = self._x[: self.t]
        v = v.view()
        v.setflags(write=False)
        return v

    @property
    def outputs(self) -> np.ndarray:
        """Read-only view of the observed outputs ``y_1..y_{t-1}``."""
        v = self._y[: self._n_obs].view()
        v.setflags(write=False)
        return v

    def x(self, s: int) -> np.ndarray:
        if s > self.t:
            raise CausalityError(f"x_{s} requested at step {self.t}")
        return self._x[s - 1].copy() if s >= 1 else np.zeros(self.n)

    def y(self, s: int) -> np.ndarray:
        if s > self._n_obs:
            raise CausalityError(f"y_{s} requested at step {self.t}; only y_1..y_{self._n_obs} are visible")
        return self._y[s - 1].copy() if s >= 1 else np.zeros(self.m)

    def input_lags(self, count: int) -> np.ndarray:
        """Rows ``x_t, x_{t-1}, ..., x_{t-count+1}`` with zero padding."""
        out = np.zeros((count, self.n))
        avail = min(count, self.t)
        if avail:
            out[:avail] = self._x[self.t - avail: self.t][::-1]
        return out

    def output_lags(self, count: int) -> np.ndarray:
        """Rows ``y_{t-1}, ..., y_{t-count}`` with zero padding."""
        out = np.zeros((count, self.m))
        avail = min(count, self._n_obs)
        if avail:
            out[:avail] = self._y[self._n_obs - avail: self._n_obs][::-1]
        return out


@dataclass(frozen=True)
class FeatureVector:
    cos: np.ndarray  # (W, k, n)
    sin: np.ndarray  # (W, k, n)
    x_lags: np.ndarray  # (tau, n): x_t, ..., x_{t-tau+1}
    y_lags: np.ndarray  # (tau, m): y_{t-1}, ..., y_{t-tau}
    lag_offset: int = 0

    def __add__(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(self.cos + other.cos, self.sin + other.sin, self.x_lags + other.x_lags,
                             self.y_lags + other.y_lags, self.lag_offset)

    def energy(self) -> float:
        return float(np.sum(self.cos ** 2) + np.sum(self.sin ** 2) + np.sum(self.x_lags ** 2)
                     + np.sum(self.y_lags ** 2))


def default_lag_offset(tau: int) -> int:
    """Offset that lines the filtered window up with the autoregressive inputs.

    ``P_0..P_{tau-1}`` cover ``x_t..x_{t-tau+1}``, so the convolution starts
    at ``x_{t-tau}``: with ``(a * x)_s = sum_{u>=1} a(u) x_{s-u}`` that is an
    offset of ``tau - 1``.
    """
    return max(tau - 1, 0)


class FeatureMap:
    """Precomputed phase-modulated kernels for one (bank, W, tau, L) choice."""

    def __init__(self, bank: FilterBank, W: int, tau: int, lag_offset: int | None = None):
        if W < 1 or tau < 1:
            raise ValueError("W and tau must be >= 1")
        self.bank = bank
        self.W, self.tau = W, tau
        self.lag_offset = default_lag_offset(tau) if lag_offset is None else int(lag_offset)
        if self.lag_offset < 0:
            raise ValueError("lag offset must be non-negative")
        u = np.arange(1, bank.T + 1)
        ang = 2.0 * np.pi * np.outer(np.arange(W), u) / W  # (W, T)
        psi = bank.scaled_filters  # (k, T)
        self.kcos = np.cos(ang)[:, None, :] * psi[None, :, :]  # (W, k, T)
        self.ksin = np.sin(ang)[:, None, :] * psi[None, :, :]
        self._kcos2 = self.kcos.reshape(W * bank.k, bank.T)
        self._ksin2 = self.ksin.reshape(W * bank.k, bank.T)

    @property
    def k(self) -> int:
        return self.bank.k

    def dims(self, n: int, m: int) -> Dims:
        return Dims(self.W, self.k, n, m, self.tau)

    def features(self, history: SeriesHistory) -> FeatureVector:
        """Direct-sum features at the current step ``t = history.t``."""
        t, L = history.t, self.lag_offset
        n = history.n
        U = max(0, min(self.bank.T, t - L - 1))
        shape = (self.W, self.k, n)
        if U:
            # rows x_{t-L-1}, ..., x_{t-L-U}
            hi = t - L - 1
            window = history.inputs[hi - U: hi][::-1]
            cos = (self._kcos2[:, :U] @ window).reshape(shape)
            sin = (self._ksin2[:, :U] @ window).reshape(shape)
        else:
            cos = np.zeros(shape)
            sin = np.zeros(shape)
        return FeatureVector(cos=cos, sin=sin, x_lags=history.input_lags(self.tau),
                             y_lags=history.output_lags(self.tau), lag_offset=L)

    def batch_filtered(self, inputs) -> tuple[np.ndarray, np.ndarray]:
        """Cos/sin features for every step of a known input sequence.

        Splits each scaled filter into its ``W`` residue classes ``u = r mod W``,
        convolves every class with the inputs by FFT, and recovers all phases
        with one length-``W`` DFT per (h, t).  Returns arrays of shape
        ``(T_in, W, k, n)``.
        """
        x = np.asarray(inputs, dtype=np.float64)
        T_in, n = x.shape
        Tb, k, W, L = self.bank.T, self.k, self.W, self.lag_offset
        size = 1 << int(np.ceil(np.log2(max(T_in + Tb + 1, 2))))
        Xf = np.fft.rfft(x, n=size, axis=0)  # (F, n)
        u = np.arange(1, Tb + 1)
        cos = np.zeros((T_in, W, k, n))
        sin = np.zeros((T_in, W, k, n))
        # rows t-1 (0-based step index) use conv index t-L-1
        steps = np.arange(T_in)
        src = steps - L - 1
        valid = src >= 0
        for h in range(k):
            classes = np.zeros((W, size))
            classes[(u % W), u] = self.bank.scaled_filters[h]
            Gf = np.fft.rfft(classes, n=size, axis=1)  # (W, F)
            conv = np.fft.irfft(Gf[:, :, None] * Xf[None, :, :], n=size, axis=1)  # (W, size, n)
            # conv[r, j] = sum_u g_r(u) x_{j - u + 1} (1-based x), i.e. (g_r * x)_{j+1}
            S = np.zeros((W, T_in, n))
            S[:, valid] = conv[:, src[valid] + 1]
            # sum_r e^{2 pi i r p / W} S_r = W * ifft over r
            F = W * np.fft.ifft(S, axis=0)  # (W, T_in, n) indexed by p
            cos[:, :, h, :] = np.moveaxis(F.real, 0, 1)
            sin[:, :, h, :] = np.moveaxis(F.imag, 0, 1)
        return cos, sin

    def batch_features(self, inputs, outputs) -> list[FeatureVector]:
        """Features for every step of fully known sequences (``outputs`` may be longer)."""
        x = np.asarray(inputs, dtype=np.float64)
        y = np.asarray(outputs, dtype=np.float64)
        cos, sin = self.batch_filtered(x)
        T_in, n = x.shape
        m = y.shape[1]
        out = []
        for t in range(1, T_in + 1):
            xl = np.zeros((self.tau, n))
            yl = np.zeros((self.tau, m))
            for j in range(self.tau):
                if t - j >= 1:
                    xl[j] = x[t - j - 1]
                if t - 1 - j >= 1:
                    yl[j] = y[t - 2 - j]
            out.append(FeatureVector(cos=cos[t - 1], sin=sin[t - 1], x_lags=xl, y_lags=yl,
                                     lag_offset=self.lag_offset))
        return out


def compute_features(history: SeriesHistory, bank: FilterBank, dims: Dims, lag_offset: int | None = None,
                     feature_map: FeatureMap | None = None) -> FeatureVector:
    if bank.k != dims.k:
        raise ValueError(f"bank has k={bank.k} filters but dims.k={dims.k}")
    if history.n != dims.n:
        raise ValueError(f"history has n={history.n} inputs but dims.n={dims.n}")
    fmap = feature_map or FeatureMap(bank, dims.W, dims.tau, lag_offset)
    return fmap.features(history)


def _check_shapes(theta: PseudoLDS, fv: FeatureVector):
    W, k, m, n = theta.M.shape
    if fv.cos.shape != (W, k, n) or fv.sin.shape != (W, k, n):
        raise ValueError(f"feature shape {fv.cos.shape} does not match theta {(W, k, n)}")
    tau = theta.P.shape[0]
    if fv.x_lags.shape != (tau, n) or fv.y_lags.shape != (tau, m):
        raise ValueError("lag features do not match theta's (tau, n, m)")


def predict(theta: PseudoLDS, fv: FeatureVector) -> np.ndarray:
    _check_shapes(theta, fv)
    if theta.beta_mode == "scalar":
        y = theta.beta @ fv.y_lags
    else:
        y = np.einsum("ujl,ul->j", theta.beta, fv.y_lags)
    y = y + np.einsum("ujn,un->j", theta.P, fv.x_lags)
    y = y + np.einsum("phjn,phn->j", theta.M, fv.cos) + np.einsum("phjn,phn->j", theta.N, fv.sin)
    return y


def design_matrix(fv: FeatureVector, beta_mode: str = "scalar") -> np.ndarray:
    """``Phi`` with ``predict(theta, fv) == Phi @ theta.to_vector()``."""
    W, k, n = fv.cos.shape
    tau, m = fv.y_lags.shape
    eye = np.eye(m)
    blocks = [
        np.einsum("jJ,phn->jphJn", eye, fv.cos).reshape(m, -1),
        np.einsum("jJ,phn->jphJn", eye, fv.sin).reshape(m, -1),
    ]
    if beta_mode == "scalar":
        blocks.append(fv.y_lags.T)
    else:
        blocks.append(np.einsum("jJ,ul->juJl", eye, fv.y_lags).reshape(m, -1))
    blocks.append(np.einsum("jJ,un->juJn", eye, fv.x_lags).reshape(m, -1))
    return np.concatenate(blocks, axis=1)


def mixed_norm_2q(M, q: float) -> float:
    """``l_q`` norm over the first axis of the Frobenius norms of the slices."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    M = np.asarray(M, dtype=np.float64)
    blocks = np.sqrt(np.sum(M.reshape(M.shape[0], -1) ** 2, axis=1)) if M.size else np.zeros(0)
    if blocks.size == 0:
        return 0.0
    if math.isinf(q):
        return float(blocks.max())
    return float(np.linalg.norm(blocks, ord=q))


def _beta_groups(theta: PseudoLDS) -> np.ndarray:
    if theta.beta_mode == "scalar":
        return np.abs(theta.beta)
    return np.sqrt(np.sum(theta.beta.reshape(theta.beta.shape[0], -1) ** 2, axis=1))


def composite_norm(theta: PseudoLDS) -> float:
    """``||M||_{2,1} + ||N||_{2,1} + ||beta||_1 + ||P||_F``.

    In matrix mode the beta term is ``sum_u ||beta_u||_F``.
    """
    return (mixed_norm_2q(theta.M, 1) + mixed_norm_2q(theta.N, 1) + float(np.sum(_beta_groups(theta)))
            + float(np.sqrt(np.sum(theta.P ** 2))))


def exponent_for(size: float) -> float | None:
    """``ln s / (ln s - 1)``, or None where that is not an exponent >= 1."""
    if size <= 1:
        return None
    ln = math.log(size)
    if ln <= 1.0:
        return None
    return ln / (ln - 1.0)


def regularizer_exponents(W: int, tau: int) -> tuple[float, float, list[str]]:
    """``(q, q', flags)`` with ``q = ln W / (ln W - 1)`` and ``q'`` likewise from ``tau``.

    Where the formula gives no exponent >= 1 (``W`` or ``tau`` below 3) the
    exponent falls back to 2 and a flag names it.
    """
    flags = []
    q = exponent_for(W)
    if q is None:
        q = 2.0
        flags.append("q_fallback")
    qp = exponent_for(tau)
    if qp is None:
        qp = 2.0
        flags.append("q_prime_fallback")
    return q, qp, flags


def regularizer(theta: PseudoLDS, exponents: tuple[float, float] | None = None) -> float:
    """``||M||_{2,q}^2 + ||N||_{2,q}^2 + ||beta||_{q'}^2 + sum_j ||P_j||_F^2``."""
    d = theta.dims
    q, qp = exponents if exponents is not None else regularizer_exponents(d.W, d.tau)[:2]
    beta_term = float(np.linalg.norm(_beta_groups(theta), ord=qp)) if d.tau else 0.0
    return (mixed_norm_2q(theta.M, q) ** 2 + mixed_norm_2q(theta.N, q) ** 2 + beta_term ** 2
            + float(np.sum(theta.P ** 2)))


def _sq_mixed_grad(X: np.ndarray, groups: np.ndarray, q: float) -> np.ndarray:
    # d/dX (sum_g b_g^q)^{2/q} = 2 S^{2/q-1} b_g^{q-2} X_g
    S = np.sum(groups ** q)
    if S == 0.0:
        return np.zeros_like(X)
    w = np.zeros_like(groups)
    nz = groups > 0
    w[nz] = 2.0 * S ** (2.0 / q - 1.0) * groups[nz] ** (q - 2.0)
    return X * w.reshape((-1,) + (1,) * (X.ndim - 1))


def regularizer_gradient(theta: PseudoLDS, exponents: tuple[float, float] | None = None) -> PseudoLDS:
    d = theta.dims
    q, qp = exponents if exponents is not None else regularizer_exponents(d.W, d.tau)[:2]

    def block_norms(X):
        return np.sqrt(np.sum(X.reshape(X.shape[0], -1) ** 2, axis=1))

    gM = _sq_mixed_grad(theta.M, block_norms(theta.M), q)
    gN = _sq_mixed_grad(theta.N, block_norms(theta.N), q)
    if theta.beta_mode == "scalar":
        # |b|^{q-2} b = sign(b) |b|^{q-1}
        gb = _sq_mixed_grad(theta.beta, np.abs(theta.beta), qp)
    else:
        gb = _sq_mixed_grad(theta.beta, block_norms(theta.beta), qp)
    return PseudoLDS(gM, gN, gb, 2.0 * theta.P)


def loss(theta: PseudoLDS, fv: FeatureVector, y_true) -> float:
    r = predict(theta, fv) - np.asarray(y_true, dtype=np.float64)
    return float(r @ r)


def gradient(theta: PseudoLDS, fv: FeatureVector, y_true) -> PseudoLDS:
    """Gradient of the squared loss, returned as a pseudo-LDS-shaped bundle.

    The cos/sin features already carry the ``sigma_h^{1/4}`` factor, so the
    M and N blocks are the exact derivatives of :func:`predict`.
    """
    r2 = 2.0 * (predict(theta, fv) - np.asarray(y_true, dtype=np.float64))
    gM = np.einsum("j,phn->phjn", r2, fv.cos)
    gN = np.einsum("j,phn->phjn", r2, fv.sin)
    if theta.beta_mode == "scalar":
        gb = fv.y_lags @ r2
    else:
        gb = np.einsum("j,ul->ujl", r2, fv.y_lags)
    gP = np.einsum("j,un->ujn", r2, fv.x_lags)
    return PseudoLDS(gM, gN, gb, gP)


def lag_stack(series, count: int, shift: int) -> np.ndarray:
    """``out[t-1, j] = series_{t - j - shift}`` (1-based, zero before the start).

    ``shift=0`` gives the input lags ``x_t..x_{t-count+1}``; ``shift=1`` the
    output lags ``y_{t-1}..y_{t-count}``.
    """
    s = np.asarray(series, dtype=np.float64)
    T, c = s.shape
    out = np.zeros((T, count, c))
    for j in range(count):
        lag = j + shift
        if lag < T:
            out[lag:, j] = s[: T - lag]
    return out


def predict_sequence(theta: PseudoLDS, feature_map: FeatureMap, inputs, outputs) -> np.ndarray:
    """Predictions ``y_hat_1..y_hat_T`` over known sequences, using the batch feature path.

    ``y_hat_t`` only reads ``outputs`` up to ``y_{t-1}``.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(outputs, dtype=np.float64)
    tau = theta.dims.tau
    cos, sin = feature_map.batch_filtered(x)
    yl = lag_stack(y[: x.shape[0]], tau, 1)
    xl = lag_stack(x, tau, 0)
    out = np.einsum("phjn,tphn->tj", theta.M, cos) + np.einsum("phjn,tphn->tj", theta.N, sin)
    out += np.einsum("ujn,tun->tj", theta.P, xl)
    if theta.beta_mode == "scalar":
        out += np.einsum("u,tuj->tj", theta.beta, yl)
    else:
        out += np.einsum("ujl,tul->tj", theta.beta, yl)
    return out
