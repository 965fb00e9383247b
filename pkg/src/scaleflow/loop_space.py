"""Fourier model of loops ``S^1 -> C^n`` and of paths with endpoints on ``R^n``.

A :class:`FourierPath` holds coefficients ``x_j`` for ``|j| <= N``.  Periodic loops
use the basis ``exp(2 pi i j t / P)`` with period ``P`` (1 for the standard circle,
2 for doubled loops on ``S^1(2)``); Lagrangian paths use ``exp(pi i j t)`` on
``[0, 1]`` with real coefficients.

Pointwise nonlinear maps act on the real picture ``R^{2n}`` with interleaved
coordinates ``(Re z_1, Im z_1, ..., Re z_n, Im z_n)``; :func:`to_real` and
:func:`to_complex` convert between the two.  The low-level helpers (``synth``,
``anal``, ``spectral_derivative`` ...) operate on raw coefficient arrays of shape
``(..., 2N+1, n)`` so that batches of paths are transformed in one FFT call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .scale_space import ScaleVector, SignMap, WeightFunction, floer_mode_order

PERIODIC = "periodic"
LAGRANGIAN = "lagrangian"
_BOUNDARIES = (PERIODIC, LAGRANGIAN)
REAL_TOL = 1e-14


class LoopSpaceError(ValueError):
    """Invalid path data or an operation the boundary type does not support."""


class UndersampledError(LoopSpaceError):
    pass


class LagrangianValidationError(LoopSpaceError):
    pass


def oversampled(N: int) -> int:
    """Collocation size used for every pointwise nonlinear evaluation."""
    return 4 * (2 * N + 1)


def modes(N: int) -> np.ndarray:
    return np.arange(-N, N + 1)


def frequencies(N: int, period: float) -> np.ndarray:
    """Eigenvalues of ``-i d/dt`` on the basis functions."""
    return 2.0 * np.pi * modes(N) / period


def fundamental_multipliers(N: int, period: float) -> np.ndarray:
    """Eigenvalues of ``F = -i d/dt + 1/2``."""
    return frequencies(N, period) + 0.5


# ---------------------------------------------------------------------------
# raw array helpers


def synth(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Samples at ``t_m = m P / M`` from coefficients ``(..., 2N+1, n)``."""
    coeffs = np.asarray(coeffs)
    N = (coeffs.shape[-2] - 1) // 2
    if M < 2 * N + 1:
        raise UndersampledError(f"M={M} < 2N+1={2 * N + 1}")
    buf = np.zeros(coeffs.shape[:-2] + (M, coeffs.shape[-1]), dtype=complex)
    buf[..., modes(N) % M, :] = coeffs
    return M * np.fft.ifft(buf, axis=-2)


def anal(samples: np.ndarray, N: int) -> np.ndarray:
    """Discrete Fourier coefficients ``|j| <= N`` of uniform samples ``(..., M, n)``."""
    samples = np.asarray(samples)
    M = samples.shape[-2]
    if M < 2 * N + 1:
        raise UndersampledError(f"M={M} < 2N+1={2 * N + 1}")
    spec = np.fft.fft(samples, axis=-2) / M
    return spec[..., modes(N) % M, :]


def spectral_derivative(coeffs: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    N = (np.shape(coeffs)[-2] - 1) // 2
    mult = (1j * frequencies(N, period)) ** order
    return np.asarray(coeffs) * mult[:, None]


def shift_coeffs(coeffs: np.ndarray, tau: float, period: float = 1.0) -> np.ndarray:
    """Coefficients of ``t -> x(t - tau)``."""
    N = (np.shape(coeffs)[-2] - 1) // 2
    if tau == 0.0:
        return np.asarray(coeffs)
    mult = np.exp(-1j * frequencies(N, period) * tau)
    return np.asarray(coeffs) * mult[:, None]


def to_real(z: np.ndarray) -> np.ndarray:
    """``(..., n)`` complex -> ``(..., 2n)`` real, interleaved (Re, Im) pairs."""
    z = np.asarray(z)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    return r[..., 0::2] + 1j * r[..., 1::2]


def weighted_norm(coeffs: np.ndarray, N: int, period: float, k: float) -> np.ndarray:
    """Sobolev norm of raw coefficients, reduced over the last two axes."""
    w = fundamental_multipliers(N, period) ** 2
    return np.sqrt(np.sum(w[:, None] ** k * np.abs(coeffs) ** 2, axis=(-2, -1)))


def weighted_inner(a: np.ndarray, b: np.ndarray, N: int, period: float, k: float = 0) -> np.ndarray:
    """Real inner product ``Re sum w_j^k <a_j, b_j>`` of raw coefficient arrays."""
    w = fundamental_multipliers(N, period) ** 2
    return np.sum(w[:, None] ** k * (a * np.conj(b)).real, axis=(-2, -1))


def resize(coeffs: np.ndarray, N_new: int) -> np.ndarray:
    """Zero-pad or truncate raw coefficients to order ``N_new``."""
    coeffs = np.asarray(coeffs)
    N = (coeffs.shape[-2] - 1) // 2
    out = np.zeros(coeffs.shape[:-2] + (2 * N_new + 1, coeffs.shape[-1]), dtype=complex)
    m = min(N, N_new)
    out[..., N_new - m : N_new + m + 1, :] = coeffs[..., N - m : N + m + 1, :]
    return out


# ---------------------------------------------------------------------------
# value types


class FourierPath:
    """Truncated Fourier series of a loop or of a path with Lagrangian boundary."""

    __slots__ = ("n", "boundary", "N", "coeffs", "period")

    def __init__(self, coeffs, boundary: str = PERIODIC, period: float | None = None):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] % 2 != 1:
            raise LoopSpaceError("coefficients must have shape (2N+1, n)")
        if boundary not in _BOUNDARIES:
            raise LoopSpaceError(f"unknown boundary type {boundary!r}")
        if not np.all(np.isfinite(c)):
            raise LoopSpaceError("coefficients must be finite")
        if boundary == LAGRANGIAN:
            if period not in (None, 2.0, 2):
                raise LoopSpaceError("Lagrangian paths use the basis exp(pi i j t)")
            period = 2.0
            scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
            if np.max(np.abs(c.imag), initial=0.0) > REAL_TOL * scale:
                raise LoopSpaceError("Lagrangian path coefficients must be real")
            c = c.real.astype(complex)
        else:
            period = 1.0 if period is None else float(period)
            if period <= 0:
                raise LoopSpaceError("period must be positive")
        c.setflags(write=False)
        self.coeffs = c
        self.n = c.shape[1]
        self.N = (c.shape[0] - 1) // 2
        self.boundary = boundary
        self.period = period

    @classmethod
    def zeros(cls, n: int, N: int, boundary: str = PERIODIC, period: float | None = None):
        return cls(np.zeros((2 * N + 1, n)), boundary, period)

    @classmethod
    def single_mode(cls, j: int, v, N: int, boundary: str = PERIODIC, period: float | None = None):
        v = np.atleast_1d(np.asarray(v, dtype=complex))
        c = np.zeros((2 * N + 1, v.size), dtype=complex)
        c[j + N] = v
        return cls(c, boundary, period)

    def like(self, coeffs) -> "FourierPath":
        """New path with the same boundary data and the given coefficients."""
        return FourierPath(coeffs, self.boundary, self.period)

    def mode(self, j: int) -> np.ndarray:
        return self.coeffs[j + self.N]

    def resized(self, N: int) -> "FourierPath":
        return self.like(resize(self.coeffs, N))

    def __add__(self, other: "FourierPath") -> "FourierPath":
        _check_compatible(self, other)
        return self.like(self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierPath") -> "FourierPath":
        _check_compatible(self, other)
        return self.like(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "FourierPath":
        return self.like(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierPath":
        return self.like(-self.coeffs)

    def __call__(self, t) -> np.ndarray:
        """Direct evaluation at times ``t`` (array), returning ``(len(t), n)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phase = np.exp(1j * np.outer(t, frequencies(self.N, self.period)))
        return phase @ self.coeffs

    def derivative(self, order: int = 1) -> "FourierPath":
        return self.like(spectral_derivative(self.coeffs, self.period, order))

    def __repr__(self):
        return f"FourierPath(n={self.n}, N={self.N}, boundary={self.boundary}, period={self.period})"

    def to_json(self) -> str:
        rows = [
            [int(j), [[float(z.real), float(z.imag)] for z in self.coeffs[j + self.N]]]
            for j in modes(self.N)
        ]
        d = {"n": self.n, "boundary": self.boundary, "N": self.N, "coeffs": rows}
        if self.boundary == PERIODIC and self.period != 1.0:
            d["period"] = self.period
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "FourierPath":
        d = json.loads(text)
        N, n = int(d["N"]), int(d["n"])
        c = np.zeros((2 * N + 1, n), dtype=complex)
        for j, vals in d["coeffs"]:
            if abs(j) > N or len(vals) != n:
                raise LoopSpaceError("serialized path does not match its header")
            c[j + N] = [complex(re, im) for re, im in vals]
        return cls(c, d["boundary"], d.get("period"))


def _check_compatible(x: FourierPath, y: FourierPath):
    if (x.boundary, x.period, x.n, x.N) != (y.boundary, y.period, y.n, y.N):
        raise LoopSpaceError("paths differ in boundary type, period, dimension or order")


@dataclass(frozen=True)
class CollocationGrid:
    """Uniform samples ``t_m = m P / M``; Lagrangian data lives on the doubled circle."""

    samples: np.ndarray
    boundary: str = PERIODIC
    period: float = 1.0

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M) * self.period / self.M


# ---------------------------------------------------------------------------
# operations


def sobolev_norm(x: FourierPath, k: float) -> float:
    """``sqrt(sum (2 pi j / P + 1/2)^{2k} |x_j|^2)``."""
    return float(weighted_norm(x.coeffs, x.N, x.period, k))


def sobolev_inner(x: FourierPath, y: FourierPath, k: float = 0) -> float:
    _check_compatible(x, y)
    return float(weighted_inner(x.coeffs, y.coeffs, x.N, x.period, k))


def floer_fundamental(x: FourierPath) -> FourierPath:
    """``F x = -i dx/dt + x/2``, diagonal on the Fourier basis."""
    return x.like(x.coeffs * fundamental_multipliers(x.N, x.period)[:, None])


def floer_fundamental_inverse(x: FourierPath) -> FourierPath:
    return x.like(x.coeffs / fundamental_multipliers(x.N, x.period)[:, None])


def synthesize(x: FourierPath, M: int | None = None) -> CollocationGrid:
    M = oversampled(x.N) if M is None else M
    return CollocationGrid(synth(x.coeffs, M), x.boundary, x.period)


def analyze(g: CollocationGrid, N: int, boundary: str | None = None, sym_tol: float = 1e-10) -> FourierPath:
    """Truncated DFT of a grid; modes ``|j| > N`` are dropped (and alias if undersampled).

    For Lagrangian grids the imaginary parts of the coefficients must vanish up to
    ``sym_tol`` (relative), otherwise the samples do not come from a reflected path.
    """
    boundary = g.boundary if boundary is None else boundary
    if boundary != g.boundary:
        raise LoopSpaceError("grid boundary type does not match the requested one")
    c = anal(g.samples, N)
    if boundary == LAGRANGIAN:
        scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
        if np.max(np.abs(c.imag), initial=0.0) > sym_tol * scale:
            raise LagrangianValidationError("grid is not reflection symmetric")
        c = c.real
    return FourierPath(c, boundary, g.period)


def pointwise_product(x: FourierPath, y: FourierPath, M: int | None = None) -> FourierPath:
    """Componentwise product ``x(t) y(t)`` with order ``N_x + N_y``."""
    if (x.boundary, x.period, x.n) != (y.boundary, y.period, y.n):
        raise LoopSpaceError("factors must share boundary type, period and dimension")
    N = x.N + y.N
    M = oversampled(N) if M is None else M
    if M < 2 * N + 1:
        raise UndersampledError("product grid too coarse for exact evaluation")
    prod = synth(x.coeffs, M) * synth(y.coeffs, M)
    c = anal(prod, N)
    if x.boundary == LAGRANGIAN:
        c = c.real
    return FourierPath(c, x.boundary, x.period)


def time_shift(x: FourierPath, tau: float) -> FourierPath:
    """``t -> x(t - tau)``; only defined on loops."""
    if x.boundary != PERIODIC:
        raise LoopSpaceError("time shifts need a periodic loop")
    return x.like(shift_coeffs(x.coeffs, tau, x.period))


def endpoint_derivatives(x: FourierPath, order: int, t: float) -> np.ndarray:
    mult = (1j * frequencies(x.N, x.period)) ** order * np.exp(1j * frequencies(x.N, x.period) * t)
    return mult @ x.coeffs


def check_lagrangian_bc(x: FourierPath, k: int, tol: float = 1e-9) -> dict:
    """Distances of ``d^l x/dt^l`` at ``t = 0, 1`` to ``R^n`` (l even) or ``i R^n`` (l odd).

    Works on any path representation; for a loop the basis of that loop is used.
    """
    entries = []
    for ell in range(k):
        for t in (0.0, 1.0):
            v = endpoint_derivatives(x, ell, t)
            dist = float(np.linalg.norm(v.imag if ell % 2 == 0 else v.real))
            entries.append(
                {"order": ell, "t": t, "target": "R^n" if ell % 2 == 0 else "iR^n", "distance": dist}
            )
    worst = max((e["distance"] for e in entries), default=0.0)
    return {"passed": worst <= tol, "k": k, "tol": tol, "max_distance": worst, "entries": entries}


def reflect_to_loop(x: FourierPath, M: int | None = None) -> FourierPath:
    """Doubled loop ``gamma(t) = x(t)`` on ``[0,1]``, ``conj(x(2-t))`` on ``[1,2]``."""
    if x.boundary != LAGRANGIAN:
        raise LoopSpaceError("reflection needs a Lagrangian path")
    M = oversampled(x.N) if M is None else M
    t = 2.0 * np.arange(M) / M
    first = t <= 1.0
    vals = np.empty((M, x.n), dtype=complex)
    vals[first] = x(t[first])
    vals[~first] = np.conj(x(2.0 - t[~first]))
    return FourierPath(anal(vals, x.N), PERIODIC, period=2.0)


def restrict_to_path(gamma: FourierPath, tol: float = 1e-12) -> FourierPath:
    """Inverse of :func:`reflect_to_loop`; requires ``gamma(2-t) = conj(gamma(t))``."""
    if gamma.boundary != PERIODIC or gamma.period != 2.0:
        raise LoopSpaceError("restriction needs a loop on the circle of length 2")
    M = oversampled(gamma.N)
    s = synth(gamma.coeffs, M)
    mirrored = s[(-np.arange(M)) % M]  # gamma(2 - t_m) = gamma(t_{M-m})
    scale = max(1.0, float(np.max(np.abs(s), initial=0.0)))
    defect = float(np.max(np.abs(mirrored - np.conj(s)), initial=0.0))
    if defect > tol * scale:
        raise LagrangianValidationError(f"loop violates the reflection symmetry (defect {defect:.3e})")
    return FourierPath(gamma.coeffs.real, LAGRANGIAN)


# ---------------------------------------------------------------------------
# bridge to the abstract scale


def scale_weight(x_or_boundary, n: int | None = None) -> WeightFunction:
    if isinstance(x_or_boundary, FourierPath):
        boundary, n = x_or_boundary.boundary, x_or_boundary.n
    else:
        boundary = x_or_boundary
    return WeightFunction.floer_lagrangian(n) if boundary == LAGRANGIAN else WeightFunction.floer_periodic(n)


def scale_signs(boundary: str, n: int) -> SignMap:
    return SignMap.floer(n if boundary == LAGRANGIAN else 2 * n)


def scale_permutation(N: int) -> np.ndarray:
    """Row indices (into ``modes(N)``) in scale order ``0, -1, 1, -2, 2, ...``."""
    return floer_mode_order(2 * N + 1) + N


def to_scale_coords(coeffs: np.ndarray, boundary: str) -> np.ndarray:
    """Raw coefficients ``(..., 2N+1, n)`` -> scale coordinates ``(..., K)``."""
    coeffs = np.asarray(coeffs)
    N = (coeffs.shape[-2] - 1) // 2
    ordered = coeffs[..., scale_permutation(N), :]
    real = ordered.real if boundary == LAGRANGIAN else to_real(ordered)
    return real.reshape(coeffs.shape[:-2] + (-1,))


def scale_weights(N: int, n: int, boundary: str) -> np.ndarray:
    block = n if boundary == LAGRANGIAN else 2 * n
    return scale_weight(boundary, n).values((2 * N + 1) * block)


def to_scale_vector(x: FourierPath) -> ScaleVector:
    if x.boundary == PERIODIC and x.period != 1.0:
        raise LoopSpaceError("only standard loops and Lagrangian paths map to the scale")
    return ScaleVector(to_scale_coords(x.coeffs, x.boundary), scale_weight(x))


def from_scale_vector(v: ScaleVector, n: int, N: int, boundary: str = PERIODIC) -> FourierPath:
    block = n if boundary == LAGRANGIAN else 2 * n
    flat = v.padded((2 * N + 1) * block)
    if np.any(flat[(2 * N + 1) * block :] != 0):
        raise LoopSpaceError("scale vector has support beyond order N")
    ordered = flat[: (2 * N + 1) * block].reshape(2 * N + 1, block)
    vals = ordered if boundary == LAGRANGIAN else to_complex(ordered)
    c = np.zeros((2 * N + 1, n), dtype=complex)
    c[scale_permutation(N)] = vals
    return FourierPath(c, boundary)
