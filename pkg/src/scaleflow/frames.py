"""Moving frames, almost complex structures and unregularized vector fields.

Pointwise data lives on ``R^{2n}`` in interleaved coordinates (see
:mod:`scaleflow.loop_space`).  Every evaluator is vectorized: points ``p`` have shape
``(..., 2n)``, times ``t`` broadcast against ``p[..., 0]``, matrices come back as
``(..., 2n, 2n)``.  Loop-level operators sample on the oversampled collocation grid,
act pointwise and transform back.

The frame and field operators accept an optional output order ``N_out`` (default:
the order of the vector argument) and grid size ``M`` (default ``4(2N+1)`` for the
larger of the input and output orders).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .loop_space import (
    LAGRANGIAN,
    PERIODIC,
    FourierPath,
    LoopSpaceError,
    anal,
    floer_fundamental,
    frequencies,
    fundamental_multipliers,
    oversampled,
    resize,
    shift_coeffs,
    spectral_derivative,
    synth,
    to_complex,
    to_real,
    weighted_norm,
)


class FrameError(ValueError):
    pass


class FrameSingularityError(FrameError):
    pass


class FrameValidationError(FrameError):
    pass


class UnsupportedFieldError(ValueError):
    pass


SINGULAR_COND = 1e12
DIFF_STEP = 1e-5


def complex_unit(n: int) -> np.ndarray:
    """Matrix of multiplication by ``i`` on ``R^{2n}``."""
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def omega_matrix(n: int) -> np.ndarray:
    """``omega_0(u, v) = u^T Omega v``, so that ``omega_0(u, i u) = |u|^2``."""
    return -complex_unit(n)


def _mv(A, v):
    return np.einsum("...ab,...b->...a", A, v)


def _eye_like(p, n):
    return np.broadcast_to(np.eye(2 * n), np.shape(p)[:-1] + (2 * n, 2 * n))


# ---------------------------------------------------------------------------
# almost complex structures


@dataclass(frozen=True)
class AlmostComplexStructure:
    """``J(p)`` with its derivative ``DJ(p)[h]`` (a matrix for each direction ``h``)."""

    n: int
    matrix: Callable
    derivative: Callable
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    standard: bool = False

    def __call__(self, p):
        return self.matrix(np.asarray(p, dtype=float))

    def dJ(self, p, h):
        return self.derivative(np.asarray(p, dtype=float), np.asarray(h, dtype=float))

    def check(self, points) -> dict:
        """Residual of ``J^2 = -1`` and symmetry/definiteness of ``Omega J``."""
        J = self(points)
        sq = np.abs(J @ J + np.eye(2 * self.n)).max()
        G = omega_matrix(self.n) @ J
        asym = np.abs(G - np.swapaxes(G, -1, -2)).max()
        min_eig = float(np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2))).min())
        return {"square_residual": float(sq), "asymmetry": float(asym), "min_metric_eig": min_eig}

    def descriptor(self) -> dict:
        return {"name": self.name, **dict(self.params)}


def standard_structure(n: int) -> AlmostComplexStructure:
    I = complex_unit(n)
    return AlmostComplexStructure(
        n,
        lambda p: np.broadcast_to(I, np.shape(p)[:-1] + I.shape),
        lambda p, h: np.zeros(np.broadcast_shapes(np.shape(p), np.shape(h))[:-1] + I.shape),
        name="standard",
        params={"n": n},
        standard=True,
    )


def symplectic_block(shear: float = 0.0, squeeze: float = 0.0) -> np.ndarray:
    """A 2x2 matrix of determinant one (hence symplectic)."""
    return np.array([[np.exp(squeeze), 0.0], [0.0, np.exp(-squeeze)]]) @ np.array([[1.0, shear], [0.0, 1.0]])


def conjugated_structure(S: np.ndarray, name: str = "constant-conjugated", params=None) -> AlmostComplexStructure:
    """Constant ``J = S i S^{-1}``; compatible whenever ``S`` is symplectic."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0] // 2
    J = S @ complex_unit(n) @ np.linalg.inv(S)
    return AlmostComplexStructure(
        n,
        lambda p: np.broadcast_to(J, np.shape(p)[:-1] + J.shape),
        lambda p, h: np.zeros(np.broadcast_shapes(np.shape(p), np.shape(h))[:-1] + J.shape),
        name=name,
        params=params or {},
    )


def constant_conjugated_structure(n: int, shear: float = 0.5, squeeze: float = 0.3) -> AlmostComplexStructure:
    S = np.kron(np.eye(n), symplectic_block(shear, squeeze))
    return conjugated_structure(S, params={"n": n, "shear": shear, "squeeze": squeeze})


def squeezed_structure(n: int, eps: float = 0.3) -> AlmostComplexStructure:
    """Nonconstant ``J(p) = S(p) i S(p)^{-1}``, ``S = exp(a(p) D)``, ``a = eps |p|^2 / (1 + |p|^2)``.

    ``D = diag(1, -1, ...)`` generates symplectic squeezes, so ``J`` is compatible.
    """
    I = complex_unit(n)
    D = np.diag(np.tile([1.0, -1.0], n))

    def matrix(p):
        r2 = np.sum(p * p, axis=-1)
        a = eps * r2 / (1 + r2)
        e = np.exp(2 * a)[..., None, None]
        # S i S^{-1} has blocks [[0, -e^{2a}], [e^{-2a}, 0]]
        return I * np.where(I < 0, e, 1.0 / e)

    def derivative(p, h):
        r2 = np.sum(p * p, axis=-1)
        da = eps * 2 * np.sum(p * h, axis=-1) / (1 + r2) ** 2
        J = matrix(p)
        return da[..., None, None] * (D @ J - J @ D)

    return AlmostComplexStructure(n, matrix, derivative, name="squeezed", params={"n": n, "eps": eps})


# ---------------------------------------------------------------------------
# frame generators


@dataclass(frozen=True)
class FrameGenerator:
    """``Psi(p)`` with ``i Psi(p) = Psi(p) J(p)``, its inverse and two derivatives."""

    n: int
    psi: Callable
    psi_inv: Callable
    dpsi: Callable
    d2psi: Callable
    structure: AlmostComplexStructure
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    identity: bool = False

    def __call__(self, p):
        return self.psi(np.asarray(p, dtype=float))

    def inverse(self, p):
        return self.psi_inv(np.asarray(p, dtype=float))

    def check(self, points) -> dict:
        P = self(points)
        I = complex_unit(self.n)
        rel = np.abs(I @ P - P @ self.structure(points)).max() / max(1.0, np.abs(P).max())
        cond = np.linalg.cond(P)
        inv_res = np.abs(self.inverse(points) @ P - np.eye(2 * self.n)).max()
        return {"intertwining_residual": float(rel), "max_cond": float(cond.max()), "inverse_residual": float(inv_res)}

    def descriptor(self) -> dict:
        return {"name": self.name, **dict(self.params)}


def trivial_frame(n: int) -> FrameGenerator:
    def zero(p, *hs):
        shape = np.broadcast_shapes(np.shape(p), *[np.shape(h) for h in hs])
        return np.zeros(shape[:-1] + (2 * n, 2 * n))

    eye = lambda p: _eye_like(p, n)
    return FrameGenerator(n, eye, eye, zero, zero, standard_structure(n), name="trivial", params={"n": n}, identity=True)


def _rotation(theta, n):
    c = np.cos(theta)[..., None, None]
    s = np.sin(theta)[..., None, None]
    return c * np.eye(2 * n) + s * complex_unit(n)


def constant_rotation_frame(n: int, angle: float) -> FrameGenerator:
    R = _rotation(np.asarray(angle), n)
    Ri = _rotation(np.asarray(-angle), n)

    def zero(p, *hs):
        shape = np.broadcast_shapes(np.shape(p), *[np.shape(h) for h in hs])
        return np.zeros(shape[:-1] + (2 * n, 2 * n))

    return FrameGenerator(
        n,
        lambda p: np.broadcast_to(R, np.shape(p)[:-1] + R.shape),
        lambda p: np.broadcast_to(Ri, np.shape(p)[:-1] + Ri.shape),
        zero,
        zero,
        standard_structure(n),
        name="constant-rotation",
        params={"n": n, "angle": angle},
    )


def scalar_rotation_frame(n: int, strength: float = 1.0) -> FrameGenerator:
    """``Psi(p) = exp(i theta(p))`` with ``theta = arctan(strength |p|^2)``; commutes with ``i``."""
    I = complex_unit(n)
    a = strength

    def theta(p):
        return np.arctan(a * np.sum(p * p, axis=-1))

    def dtheta(p, h):
        r2 = np.sum(p * p, axis=-1)
        return 2 * a * np.sum(p * h, axis=-1) / (1 + (a * r2) ** 2)

    def d2theta(p, h, k):
        r2 = np.sum(p * p, axis=-1)
        den = 1 + (a * r2) ** 2
        ph, pk = np.sum(p * h, axis=-1), np.sum(p * k, axis=-1)
        return 2 * a * np.sum(h * k, axis=-1) / den - 8 * a**3 * r2 * ph * pk / den**2

    def dpsi(p, h):
        return dtheta(p, h)[..., None, None] * (I @ _rotation(theta(p), n))

    def d2psi(p, h, k):
        R = _rotation(theta(p), n)
        first = d2theta(p, h, k)[..., None, None] * (I @ R)
        second = (dtheta(p, h) * dtheta(p, k))[..., None, None] * R
        return first - second

    return FrameGenerator(
        n,
        lambda p: _rotation(theta(p), n),
        lambda p: _rotation(-theta(p), n),
        dpsi,
        d2psi,
        standard_structure(n),
        name="scalar-rotation",
        params={"n": n, "strength": strength},
    )


def build_frame_from_J(
    J: AlmostComplexStructure, check_points=None, tol: float = 1e-8, step: float = DIFF_STEP
) -> FrameGenerator:
    """Frame ``Psi = 2 (1 - J i)^{-1}`` intertwining ``J`` with ``i``.

    ``J (1 - J i) = (1 - J i) i`` gives ``i Psi = Psi J``; ``1 - J i = -(J + i) i`` is
    invertible because ``(J + i) v = 0`` would make ``omega_0(v, J v) = -|v|^2``.
    ``DPsi`` is exact (``Psi (DJ[h] i / 2) Psi``); ``D^2 Psi`` is a central difference of
    ``DPsi`` with the declared step.
    """
    n = J.n
    if J.standard:
        return trivial_frame(n)
    if check_points is None:
        check_points = np.random.default_rng(0).uniform(-2.0, 2.0, size=(256, 2 * n))
    rep = J.check(check_points)
    if rep["square_residual"] > 1e-10 or rep["asymmetry"] > 1e-10 or rep["min_metric_eig"] <= 0:
        raise FrameValidationError(f"J is not an omega_0-compatible complex structure: {rep}")
    I = complex_unit(n)
    eye = np.eye(2 * n)

    def psi(p):
        return 2.0 * np.linalg.inv(eye - J(p) @ I)

    def psi_inv(p):
        return 0.5 * (eye - J(p) @ I)

    def dpsi(p, h):
        P = psi(p)
        return 0.5 * P @ J.dJ(p, h) @ I @ P

    def d2psi(p, h, k):
        k = np.asarray(k, dtype=float)
        return (dpsi(p + step * k, h) - dpsi(p - step * k, h)) / (2 * step)

    frame = FrameGenerator(n, psi, psi_inv, dpsi, d2psi, J, name="from-J", params={"structure": J.descriptor()})
    res = frame.check(check_points)
    if res["intertwining_residual"] > tol:
        raise FrameValidationError(f"frame does not intertwine J and i: {res}")
    return frame


# ---------------------------------------------------------------------------
# Hamiltonians and vector fields


@dataclass(frozen=True)
class HamiltonianSpec:
    n: int
    value: Callable
    grad: Callable
    hess: Callable
    dt_grad: Callable
    gamma: float
    c: float
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    box: float = 4.0

    def descriptor(self) -> dict:
        return {"name": self.name, **dict(self.params)}


def quadratic_hamiltonian(n: int, gamma: float) -> HamiltonianSpec:
    """``H = gamma/2 |p|^2``; condition (H) holds with ``c = |gamma|``."""
    return HamiltonianSpec(
        n,
        lambda t, p: 0.5 * gamma * np.sum(p * p, axis=-1),
        lambda t, p: gamma * p,
        lambda t, p: gamma * _eye_like(p, n),
        lambda t, p: np.zeros_like(p),
        gamma,
        abs(gamma),
        name="quadratic",
        params={"n": n, "gamma": gamma},
    )


def _bump_profile(u):
    """``g(u) = exp(-1/(1-u))`` on ``u < 1`` with its first two derivatives."""
    inside = u < 1
    s = np.where(inside, 1.0 / (1.0 - np.where(inside, u, 0.0)), 0.0)
    g = np.where(inside, np.exp(-s), 0.0)
    g1 = -g * s**2
    g2 = g * (s**4 - 2 * s**3)
    return g, g1, g2


def bump_bounds(radius: float) -> tuple[float, float]:
    """Suprema of ``|grad g(|p|^2/R^2)|`` and ``||Hess g(|p|^2/R^2)||`` via a fine radial grid."""
    u = np.linspace(0.0, 1.0, 200001)[:-1]
    _, g1, g2 = _bump_profile(u)
    grad = np.max(np.abs(g1) * 2 * np.sqrt(u)) / radius
    hess = np.max(np.maximum(np.abs(4 * u * g2 + 2 * g1), np.abs(2 * g1))) / radius**2
    return float(grad), float(hess)


def bump_hamiltonian(
    n: int,
    gamma: float,
    amplitude: float = 0.5,
    center=None,
    radius: float = 1.0,
    modulation: float = 0.0,
) -> HamiltonianSpec:
    """``gamma/2 |p|^2 + A (1 + m sin 2 pi t) g(|p - p0|^2 / R^2)`` with a compact bump ``g``."""
    p0 = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    R2 = radius**2

    def parts(t, p):
        d = p - p0
        u = np.sum(d * d, axis=-1) / R2
        return d, _bump_profile(u)

    def mod(t):
        return amplitude * (1 + modulation * np.sin(2 * np.pi * np.asarray(t)))

    def value(t, p):
        _, (g, _, _) = parts(t, p)
        return 0.5 * gamma * np.sum(p * p, axis=-1) + mod(t) * g

    def grad(t, p):
        d, (_, g1, _) = parts(t, p)
        return gamma * p + (mod(t) * g1 * 2 / R2)[..., None] * d

    def hess(t, p):
        d, (_, g1, g2) = parts(t, p)
        outer = d[..., :, None] * d[..., None, :]
        m = mod(t)
        return gamma * _eye_like(p, n) + (m * g2 * 4 / R2**2)[..., None, None] * outer + (
            m * g1 * 2 / R2
        )[..., None, None] * np.eye(2 * n)

    def dt_grad(t, p):
        d, (_, g1, _) = parts(t, p)
        dm = amplitude * modulation * 2 * np.pi * np.cos(2 * np.pi * np.asarray(t))
        return (dm * g1 * 2 / R2)[..., None] * d

    G1, G2 = bump_bounds(radius)
    a, m = abs(amplitude), abs(modulation)
    c = abs(gamma) + a * max((1 + m) * G1, 2 * np.pi * m * G1, (1 + m) * G2)
    params = {"n": n, "gamma": gamma, "amplitude": amplitude, "center": p0.tolist(), "radius": radius, "modulation": modulation}
    return HamiltonianSpec(n, value, grad, hess, dt_grad, gamma, float(c), name="bump", params=params)


def quartic_hamiltonian(n: int) -> HamiltonianSpec:
    """``H = |p|^4``: Hessian grows like ``12 |p|^2`` so condition (H) fails."""

    def hess(t, p):
        r2 = np.sum(p * p, axis=-1)
        return 4 * r2[..., None, None] * np.eye(2 * n) + 8 * p[..., :, None] * p[..., None, :]

    return HamiltonianSpec(
        n,
        lambda t, p: np.sum(p * p, axis=-1) ** 2,
        lambda t, p: 4 * np.sum(p * p, axis=-1)[..., None] * p,
        hess,
        lambda t, p: np.zeros_like(p),
        gamma=1.0,
        c=1.0,
        name="quartic",
        params={"n": n},
    )


@dataclass(frozen=True)
class VectorTerm:
    """One summand ``X_t(x(t - tau))`` of a field, with its Jacobian and time derivative."""

    tau: float
    value: Callable
    jacobian: Callable
    dt: Callable
    gamma: float = 0.0


def linear_term(n: int, gamma: float, tau: float = 0.0) -> VectorTerm:
    return VectorTerm(
        tau,
        lambda t, p: gamma * p,
        lambda t, p: gamma * _eye_like(p, n),
        lambda t, p: np.zeros_like(p),
        gamma,
    )


@dataclass(frozen=True)
class FieldSpec:
    """``V(x)(t) = -J(x(t)) dx/dt - sum_j X^j_t(x(t - tau_j))``."""

    kind: str
    n: int
    structure: AlmostComplexStructure
    terms: tuple
    hamiltonian: HamiltonianSpec | None = None
    gamma: float = 0.0
    c: float = 0.0
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        taus = [t.tau for t in self.terms]
        if any(b <= a for a, b in zip(taus, taus[1:])) or any(not 0 <= t < 1 for t in taus):
            raise UnsupportedFieldError("delay times must satisfy 0 <= tau_1 < ... < tau_m < 1")

    @property
    def elementary(self) -> bool:
        return self.structure.standard

    @property
    def has_delay(self) -> bool:
        return any(t.tau != 0.0 for t in self.terms)

    def descriptor(self) -> dict:
        return {"name": self.name, **dict(self.params)}


def floer_field(H: HamiltonianSpec, J: AlmostComplexStructure | None = None) -> FieldSpec:
    J = standard_structure(H.n) if J is None else J
    term = VectorTerm(0.0, H.grad, H.hess, H.dt_grad, H.gamma)
    params = {"hamiltonian": H.descriptor(), "structure": J.descriptor()}
    return FieldSpec("floer", H.n, J, (term,), H, H.gamma, H.c, name="floer", params=params)


def general_field(n: int, term: VectorTerm, gamma: float, c: float, J=None, name="general", params=None) -> FieldSpec:
    J = standard_structure(n) if J is None else J
    return FieldSpec("general", n, J, (term,), None, gamma, c, name=name, params=params or {})


def linear_field(n: int, gamma: float) -> FieldSpec:
    """``X = gamma p``: growth (X) holds with ``c = |gamma|``."""
    return general_field(n, linear_term(n, gamma), gamma, abs(gamma), name="linear", params={"n": n, "gamma": gamma})


def delay_field(n: int, delays, J=None) -> FieldSpec:
    """Linear delay terms ``gamma_j x(t - tau_j)`` from pairs ``(tau_j, gamma_j)``."""
    delays = sorted((float(t), float(g)) for t, g in delays)
    terms = tuple(linear_term(n, g, t) for t, g in delays)
    gamma = sum(g for _, g in delays)
    c = sum(abs(g) for _, g in delays)
    J = standard_structure(n) if J is None else J
    return FieldSpec("delay", n, J, terms, None, gamma, c, name="delay", params={"n": n, "delays": [list(d) for d in delays]})


# ---------------------------------------------------------------------------
# collocation plumbing


def _grid_size(M, *orders):
    return oversampled(max(orders)) if M is None else M


def _times(M, period):
    return period * np.arange(M) / M


def _samples(coeffs, M):
    return to_real(synth(coeffs, M))


def _back(values, N_out, boundary):
    c = anal(to_complex(values), N_out)
    return c.real.astype(complex) if boundary == LAGRANGIAN else c


def _check_frame(frame: FrameGenerator, P):
    if frame.identity:
        return
    if not np.all(np.isfinite(P)) or np.max(np.linalg.cond(P)) > SINGULAR_COND:
        raise FrameSingularityError("frame matrix is numerically singular at a collocation point")


def _check_delay(spec: FieldSpec, boundary):
    if spec.has_delay and boundary != PERIODIC:
        raise UnsupportedFieldError("delay fields need periodic loops")


# raw coefficient-level kernels; ``coeffs`` arrays may carry leading batch axes


def frame_apply_raw(frame, x, v, period, N_out, M, boundary=PERIODIC, inverse=False):
    p = _samples(x, M)
    P = frame.inverse(p) if inverse else frame(p)
    _check_frame(frame, P)
    return _back(_mv(P, _samples(v, M)), N_out, boundary)


def frame_differential_raw(frame, x, h, v, period, N_out, M, boundary=PERIODIC):
    p = _samples(x, M)
    return _back(_mv(frame.dpsi(p, _samples(h, M)), _samples(v, M)), N_out, boundary)


def _term_sum(spec, x, period, M, t, xh=None):
    """Pointwise sum of ``X^j`` (or ``DX^j . xh``) over the delayed copies of ``x``."""
    total = 0.0
    for term in spec.terms:
        p = _samples(shift_coeffs(x, term.tau, period), M)
        if xh is None:
            total = total + term.value(t, p)
        else:
            q = _samples(shift_coeffs(xh, term.tau, period), M)
            total = total + _mv(term.jacobian(t, p), q)
    return total


def vf_eval_raw(spec, x, period, N_out, M, boundary=PERIODIC):
    t = _times(M, period)
    pointwise = -_term_sum(spec, x, period, M, t) if spec.terms else 0.0
    if spec.structure.standard:
        # -i d/dt acts as 2 pi j / P on mode j
        lin = resize(x * frequencies((x.shape[-2] - 1) // 2, period)[:, None], N_out)
    else:
        lin = 0.0
        p = _samples(x, M)
        pointwise = pointwise - _mv(spec.structure(p), _samples(spectral_derivative(x, period), M))
    if np.isscalar(pointwise):
        return lin + np.zeros(x.shape[:-2] + (2 * N_out + 1, spec.n), dtype=complex)
    return lin + _back(pointwise, N_out, boundary)


def vf_diff_raw(spec, x, xh, period, N_out, M, boundary=PERIODIC):
    t = _times(M, period)
    pointwise = -_term_sum(spec, x, period, M, t, xh) if spec.terms else 0.0
    if spec.structure.standard:
        Nh = (np.shape(xh)[-2] - 1) // 2
        lin = resize(xh * frequencies(Nh, period)[:, None], N_out)
    else:
        lin = 0.0
        p = _samples(x, M)
        q = _samples(xh, M)
        dx = _samples(spectral_derivative(x, period), M)
        dq = _samples(spectral_derivative(xh, period), M)
        J = spec.structure(p)
        pointwise = pointwise - _mv(spec.structure.dJ(p, q), dx) - _mv(J, dq)
    if np.isscalar(pointwise):
        return lin + np.zeros(np.shape(xh)[:-2] + (2 * N_out + 1, spec.n), dtype=complex)
    return lin + _back(pointwise, N_out, boundary)


def remainder_explicit_raw(spec, frame, x, xh, period, N_out, M, boundary=PERIODIC):
    """Four-term pointwise formula for ``P(x) xh``."""
    t = _times(M, period)
    I = complex_unit(spec.n)
    p = _samples(x, M)
    q = _samples(xh, M)
    dx = _samples(spectral_derivative(x, period), M)
    Psi = frame(p)
    _check_frame(frame, Psi)
    y = _mv(frame.inverse(p), q)
    val = -0.5 * q
    if not spec.structure.standard:
        val = val - _mv(Psi, _mv(spec.structure.dJ(p, y), dx))
    if not frame.identity:
        val = val + _mv(I, _mv(frame.dpsi(p, dx), y))
    for term in spec.terms:
        if term.tau == 0.0:
            ps, ys = p, y
        else:
            ps = _samples(shift_coeffs(x, term.tau, period), M)
            qs = _samples(shift_coeffs(xh, term.tau, period), M)
            ys = _mv(frame.inverse(ps), qs)
        val = val - _mv(Psi, _mv(term.jacobian(t, ps), ys))
    return _back(val, N_out, boundary)


# ---------------------------------------------------------------------------
# loop-level operators


def _like(v: FourierPath, coeffs) -> FourierPath:
    return FourierPath(coeffs, v.boundary, v.period)


def _compatible(x: FourierPath, v: FourierPath):
    if (x.boundary, x.period, x.n) != (v.boundary, v.period, v.n):
        raise LoopSpaceError("paths differ in boundary type, period or dimension")


def frame_apply(frame: FrameGenerator, x: FourierPath, v: FourierPath, N_out=None, M=None) -> FourierPath:
    """Coefficients of ``t -> Psi(x(t)) v(t)``."""
    _compatible(x, v)
    N_out = v.N if N_out is None else N_out
    M = _grid_size(M, x.N, v.N, N_out)
    return _like(v, frame_apply_raw(frame, x.coeffs, v.coeffs, v.period, N_out, M, v.boundary))


def frame_inverse_apply(frame: FrameGenerator, x: FourierPath, v: FourierPath, N_out=None, M=None) -> FourierPath:
    _compatible(x, v)
    N_out = v.N if N_out is None else N_out
    M = _grid_size(M, x.N, v.N, N_out)
    return _like(v, frame_apply_raw(frame, x.coeffs, v.coeffs, v.period, N_out, M, v.boundary, inverse=True))


def frame_differential(frame, x: FourierPath, h: FourierPath, v: FourierPath, N_out=None, M=None) -> FourierPath:
    """Coefficients of ``t -> DPsi(x(t))[h(t)] v(t)``."""
    _compatible(x, v)
    _compatible(x, h)
    N_out = v.N if N_out is None else N_out
    M = _grid_size(M, x.N, h.N, v.N, N_out)
    return _like(v, frame_differential_raw(frame, x.coeffs, h.coeffs, v.coeffs, v.period, N_out, M, v.boundary))


def vf_eval(spec: FieldSpec, x: FourierPath, N_out=None, M=None) -> FourierPath:
    _check_delay(spec, x.boundary)
    N_out = x.N if N_out is None else N_out
    M = _grid_size(M, x.N, N_out)
    return _like(x, vf_eval_raw(spec, x.coeffs, x.period, N_out, M, x.boundary))


def vf_diff(spec: FieldSpec, x: FourierPath, xh: FourierPath, N_out=None, M=None) -> FourierPath:
    _check_delay(spec, x.boundary)
    _compatible(x, xh)
    N_out = xh.N if N_out is None else N_out
    M = _grid_size(M, x.N, xh.N, N_out)
    return _like(xh, vf_diff_raw(spec, x.coeffs, xh.coeffs, x.period, N_out, M, x.boundary))


def conjugated_remainder(
    spec: FieldSpec, frame: FrameGenerator, x: FourierPath, xh: FourierPath, path: str = "explicit", N_out=None, M=None
) -> FourierPath:
    """``P(x) xh`` by the explicit formula (``path="explicit"``) or by its definition
    ``Phi(x) DV(x) Phi(x)^{-1} - F`` (``path="definition"``)."""
    _check_delay(spec, x.boundary)
    _compatible(x, xh)
    N_out = xh.N if N_out is None else N_out
    M = _grid_size(M, x.N, xh.N, N_out)
    if path == "explicit":
        return _like(xh, remainder_explicit_raw(spec, frame, x.coeffs, xh.coeffs, x.period, N_out, M, x.boundary))
    if path != "definition":
        raise ValueError(f"unknown evaluation path {path!r}")
    y = frame_inverse_apply(frame, x, xh, N_out=N_out, M=M)
    dv = vf_diff(spec, x, y, N_out=N_out, M=M)
    return frame_apply(frame, x, dv, N_out=N_out, M=M) - floer_fundamental(xh.resized(N_out))


# ---------------------------------------------------------------------------
# growth conditions and constants


def check_growth_condition(spec, box=None, samples: int = 4096, seed: int = 0) -> dict:
    """Sample the three quantities of the growth condition on ``[-box, box]^{2n} x S^1``.

    Accepts a :class:`FieldSpec` or a :class:`HamiltonianSpec`.  Delay terms are summed
    pointwise (the shifts do not change sup norms).
    """
    if isinstance(spec, HamiltonianSpec):
        spec = floer_field(spec)
    if box is None:
        box = spec.hamiltonian.box if spec.hamiltonian is not None else 4.0
    rng = np.random.default_rng(seed)
    p = rng.uniform(-box, box, size=(samples, 2 * spec.n))
    t = rng.uniform(0.0, 1.0, size=samples)
    X = sum(term.value(t, p) for term in spec.terms)
    DX = sum(term.jacobian(t, p) for term in spec.terms)
    dX = sum(term.dt(t, p) for term in spec.terms)
    maxima = {
        "time_derivative": float(np.max(np.linalg.norm(dX, axis=-1))),
        "deviation": float(np.max(np.linalg.norm(X - spec.gamma * p, axis=-1))),
        "jacobian": float(np.max(np.linalg.norm(DX, ord=2, axis=(-2, -1)))),
    }
    return {
        "gamma": spec.gamma,
        "c": spec.c,
        "box": box,
        "samples": samples,
        "maxima": maxima,
        "passed": all(v <= spec.c * (1 + 1e-12) for v in maxima.values()),
    }


def elementary_constant(gamma: float, c: float) -> float:
    """Closed-form constant ``max{1, 2c, c + 2|gamma|} / min{1, |gamma|}`` for (V3')."""
    return max(1.0, 2 * c, c + 2 * abs(gamma)) / min(1.0, abs(gamma))


def v3_constant(kappa: float, gamma: float, c: float) -> dict:
    """Constant chain for (V3) with ``J = i``, ``X = gamma p + R`` and ``|R|, |DR|, |d_t R| <= c``.

    ``||V x||_1 >= ||x||_2 - kappa/2 - ||X(x)||_1`` and
    ``||X(x)||_1 <= |gamma| kappa + 3c/2 + 2c kappa`` on the kappa-ball, so ``d1 = 1`` and
    ``d2 = kappa/2 + 3c/2 + (2c + |gamma|) kappa``.
    """
    d1 = 1.0
    d2 = 0.5 * kappa + 1.5 * c + (2 * c + abs(gamma)) * kappa
    p_bound = 0.5 + abs(gamma) + c
    return {"d1": d1, "d2": d2, "p_bound": p_bound, "c1": max(1.0 / d1, p_bound, d2 / d1)}


# ---------------------------------------------------------------------------
# truncated operator matrices and the axiom suite


def loglog_slope(eps, errors, floor: float = 1e-13) -> float:
    """Least-squares slope of ``log err`` vs ``log eps`` over points above ``floor``."""
    eps, errors = np.asarray(eps, float), np.asarray(errors, float)
    keep = errors > floor
    if keep.sum() < 2:
        return float("inf")
    return float(np.polyfit(np.log(eps[keep]), np.log(errors[keep]), 1)[0])


def basis_batch(n: int, N: int, boundary: str = PERIODIC) -> np.ndarray:
    """Real basis of the truncated space as a batch ``(K, 2N+1, n)``."""
    K = 2 * N + 1
    reals = np.eye(K * n).reshape(K * n, K, n).astype(complex)
    if boundary == LAGRANGIAN:
        return reals
    return np.concatenate([reals, 1j * reals])


def coords(coeffs: np.ndarray, boundary: str = PERIODIC) -> np.ndarray:
    """Real coordinates matching :func:`basis_batch` (flattened over the last two axes)."""
    flat = coeffs.reshape(coeffs.shape[:-2] + (-1,))
    return flat.real if boundary == LAGRANGIAN else np.concatenate([flat.real, flat.imag], axis=-1)


def coord_weights(n: int, N: int, period: float, k: float, boundary: str = PERIODIC) -> np.ndarray:
    w = np.repeat(fundamental_multipliers(N, period) ** 2, n) ** k
    return w if boundary == LAGRANGIAN else np.concatenate([w, w])


def operator_matrix(apply, n: int, N: int, boundary: str = PERIODIC) -> np.ndarray:
    """Matrix of a linear map on the order-``N`` space, from a batched ``apply``."""
    out = apply(basis_batch(n, N, boundary))
    return coords(out, boundary).T


def induced_norm(A: np.ndarray, weights_in: np.ndarray, weights_out: np.ndarray | None = None) -> float:
    weights_out = weights_in if weights_out is None else weights_out
    B = np.sqrt(weights_out)[:, None] * A / np.sqrt(weights_in)[None, :]
    return float(np.linalg.norm(B, 2))


def bilinear_norm(frame, x, period, N, M, k, boundary=PERIODIC, iters: int = 12, seed: int = 0) -> float:
    """Alternating-maximization estimate of ``sup |DPhi(x)(h, v)|_k / (|h|_k |v|_k)``."""
    n = frame.n
    if frame.identity:
        return 0.0
    w = coord_weights(n, N, period, k, boundary)
    basis = basis_batch(n, N, boundary)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=basis.shape[1:]) * (1 + 0j)
    sigma = 0.0
    for it in range(iters):
        # h -> DPhi(x)(h, v) with v fixed
        A = coords(frame_differential_raw(frame, x, basis, v[None], period, N, M, boundary), boundary).T
        B = np.sqrt(w)[:, None] * A / np.sqrt(w)[None, :]
        U, s, Vt = np.linalg.svd(B)
        vnorm = np.sqrt(np.sum(w * coords(v[None], boundary)[0] ** 2))
        sigma = s[0] / vnorm
        hc = Vt[0] / np.sqrt(w)
        h = (basis * hc[:, None, None]).sum(axis=0)
        # v -> DPhi(x)(h, v) with h fixed
        A = coords(frame_differential_raw(frame, x, h[None], basis, period, N, M, boundary), boundary).T
        B = np.sqrt(w)[:, None] * A / np.sqrt(w)[None, :]
        U, s, Vt = np.linalg.svd(B)
        vc = Vt[0] / np.sqrt(w)
        v = (basis * vc[:, None, None]).sum(axis=0)
        sigma = max(sigma, s[0])
    return float(sigma)


@dataclass
class AxiomConfig:
    kappa: float = 1.0
    ladder: tuple = (8, 16, 32)
    samples: int = 6
    input_modes: int = 3
    seed: int = 0
    roundtrip_tol: float = 1e-8
    slope_min: float = 1.9
    stability_ratio: float = 1.5
    v3_samples: int = 100
    c1: float | None = None
    c1_prime: float | None = None
    level_offset: int | None = None
    fd_eps: tuple = (1e-2, 1e-3, 1e-4, 1e-5)


def random_path(rng, n, N, modes, scale_norm, level, boundary=PERIODIC, period=1.0) -> FourierPath:
    """Random path with support ``|j| <= modes``, rescaled to a given level norm."""
    c = np.zeros((2 * N + 1, n), dtype=complex)
    m = min(modes, N)
    decay = 1.0 / (1.0 + np.abs(np.arange(-m, m + 1)))[:, None] ** 2
    block = rng.normal(size=(2 * m + 1, n))
    if boundary != LAGRANGIAN:
        block = block + 1j * rng.normal(size=(2 * m + 1, n))
    c[N - m : N + m + 1] = decay * block
    x = FourierPath(c, boundary, None if boundary == LAGRANGIAN else period)
    nrm = weighted_norm(x.coeffs, N, x.period, level)
    return x * (scale_norm / nrm) if nrm > 0 else x


def axiom_suite(frame: FrameGenerator | None = None, spec: FieldSpec | None = None, config: AxiomConfig | None = None) -> dict:
    """Numerical check of the frame axioms and the field axioms on a kappa-ball.

    Levels use ``H_k = W^{k+offset,2}`` with offset 0 for the trivial frame (elementary
    case) and 1 otherwise.
    """
    cfg = config or AxiomConfig()
    if frame is None:
        frame = build_frame_from_J(spec.structure) if spec is not None else None
    if frame is None:
        raise ValueError("axiom_suite needs a frame or a field")
    n = frame.n
    offset = cfg.level_offset if cfg.level_offset is not None else (0 if frame.identity else 1)
    rng = np.random.default_rng(cfg.seed)
    N0 = cfg.ladder[0]
    xs = [
        random_path(rng, n, N0, cfg.input_modes, cfg.kappa * rng.uniform(0.2, 1.0), 1 + offset) for _ in range(cfg.samples)
    ]
    vs = [random_path(rng, n, N0, cfg.input_modes, 1.0, offset) for _ in range(cfg.samples)]
    hs = [random_path(rng, n, N0, cfg.input_modes, 1.0, offset) for _ in range(cfg.samples)]
    report = {"frame": frame.descriptor(), "kappa": cfg.kappa, "ladder": list(cfg.ladder), "level_offset": offset}
    checks = {}

    # (Phi1)/(Phi5): roundtrip at levels 0 and 1, computed with a generous intermediate order
    worst = {0: 0.0, 1: 0.0}
    for x, v in zip(xs, vs):
        Nmid = 4 * N0
        fv = frame_apply(frame, x, v, N_out=Nmid)
        back = frame_inverse_apply(frame, x, fv, N_out=N0)
        for k in (0, 1):
            worst[k] = max(worst[k], sobolev_norm_rel(back - v, v, k + offset))
    checks["roundtrip"] = {
        "level0": worst[0],
        "level1": worst[1],
        "passed": max(worst.values()) <= cfg.roundtrip_tol,
    }

    # (Phi3): finite-difference order of the frame differential
    slopes = []
    for x, h, v in zip(xs, hs, vs):
        base = frame_apply(frame, x, v)
        lin = frame_differential(frame, x, h, v)
        errs = [sobolev_norm_abs(frame_apply(frame, x + e * h, v) - base - e * lin, offset) for e in cfg.fd_eps]
        slopes.append(loglog_slope(cfg.fd_eps, errs))
    checks["differential"] = {"slopes": slopes, "passed": min(slopes) >= cfg.slope_min}

    # (Phi6) and (V2): operator norms along the truncation ladder
    per_N = []
    for N in cfg.ladder:
        M = oversampled(N)
        best = {"frame": 0.0, "inverse": 0.0, "differential": 0.0, "remainder": 0.0}
        for x in xs:
            xc = resize(x.coeffs, N)
            w0 = coord_weights(n, N, x.period, offset)
            w1 = coord_weights(n, N, x.period, 1 + offset)
            A = operator_matrix(lambda b: frame_apply_raw(frame, xc, b, x.period, N, M), n, N)
            Ai = operator_matrix(lambda b: frame_apply_raw(frame, xc, b, x.period, N, M, inverse=True), n, N)
            best["frame"] = max(best["frame"], induced_norm(A, w0), induced_norm(A, w1))
            best["inverse"] = max(best["inverse"], induced_norm(Ai, w0), induced_norm(Ai, w1))
            best["differential"] = max(best["differential"], bilinear_norm(frame, xc, x.period, N, M, offset))
            if spec is not None:
                Pm = operator_matrix(lambda b: remainder_explicit_raw(spec, frame, xc, b, x.period, N, M), n, N)
                best["remainder"] = max(best["remainder"], induced_norm(Pm, w0))
        best["N"] = N
        best["c0"] = max(best["frame"], best["inverse"], best["differential"])
        per_N.append(best)
    c0s = [b["c0"] for b in per_N]
    checks["c0"] = {
        "per_N": per_N,
        "c0": max(c0s),
        "ratio": max(c0s) / min(c0s),
        "passed": max(c0s) / min(c0s) <= cfg.stability_ratio,
    }
    report["c0"] = max(c0s)

    if spec is not None:
        rem = [b["remainder"] for b in per_N]
        checks["remainder"] = {
            "norms": rem,
            "ratio": max(rem) / max(min(rem), 1e-300),
            "passed": max(rem) / max(min(rem), 1e-300) <= cfg.stability_ratio,
        }
        report["remainder_norm"] = max(rem)
        if cfg.c1 is not None:
            checks["v3"] = _v3_check(spec, cfg, rng, offset)
        if cfg.c1_prime is not None:
            checks["v3_prime"] = _v3_prime_check(spec, cfg, rng, max(rem))
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks.values())
    return report


def sobolev_norm_abs(x: FourierPath, k) -> float:
    return float(weighted_norm(x.coeffs, x.N, x.period, k))


def sobolev_norm_rel(err: FourierPath, ref: FourierPath, k) -> float:
    return sobolev_norm_abs(err, k) / max(sobolev_norm_abs(ref, k), 1e-300)


def _v3_check(spec, cfg, rng, offset) -> dict:
    """``||x||_2 <= c1 (||V x||_1 + 1)`` on random points of the kappa-ball of ``H_1``."""
    N = cfg.ladder[-1]
    worst = -np.inf
    for _ in range(cfg.v3_samples):
        x = random_path(rng, spec.n, N, min(N, 8), cfg.kappa * rng.uniform(0.05, 1.0), 1 + offset)
        lhs = sobolev_norm_abs(x, 2 + offset)
        rhs = cfg.c1 * (sobolev_norm_abs(vf_eval(spec, x), 1 + offset) + 1)
        worst = max(worst, lhs / rhs)
    return {"c1": cfg.c1, "max_ratio": float(worst), "passed": bool(worst <= 1 + 1e-12)}


def _v3_prime_check(spec, cfg, rng, remainder_norm) -> dict:
    """(V3'): the three uniform estimates on points of all sizes."""
    if not spec.elementary:
        raise UnsupportedFieldError("(V3') concerns elementary fields")
    N = cfg.ladder[-1]
    c = cfg.c1_prime
    r1 = r2 = 0.0
    for _ in range(cfg.v3_samples):
        radius = 10 ** rng.uniform(-2, 2)
        x = random_path(rng, spec.n, N, min(N, 8), radius, 1)
        V = vf_eval(spec, x)
        n1, n2 = sobolev_norm_abs(x, 1), sobolev_norm_abs(x, 2)
        r1 = max(r1, n1 / (c * (sobolev_norm_abs(V, 0) + 1)))
        r2 = max(r2, n2 / (c * (sobolev_norm_abs(V, 1) + n1 + 1)))
    return {
        "c1_prime": c,
        "remainder_norm": remainder_norm,
        "max_ratio_level1": float(r1),
        "max_ratio_level2": float(r2),
        "passed": bool(remainder_norm <= c and r1 <= 1 + 1e-12 and r2 <= 1 + 1e-12),
    }


# ---------------------------------------------------------------------------
# catalog

STRUCTURES = {
    "standard": standard_structure,
    "constant-conjugated": constant_conjugated_structure,
    "squeezed": squeezed_structure,
}
HAMILTONIANS = {"quadratic": quadratic_hamiltonian, "bump": bump_hamiltonian, "quartic": quartic_hamiltonian}


def structure_from_descriptor(d: Mapping) -> AlmostComplexStructure:
    d = dict(d)
    return STRUCTURES[d.pop("name")](**d)


def hamiltonian_from_descriptor(d: Mapping) -> HamiltonianSpec:
    d = dict(d)
    return HAMILTONIANS[d.pop("name")](**d)


def _frame_from_J_descriptor(structure: Mapping) -> FrameGenerator:
    return build_frame_from_J(structure_from_descriptor(structure))


FRAMES = {
    "trivial": trivial_frame,
    "constant-rotation": constant_rotation_frame,
    "scalar-rotation": scalar_rotation_frame,
    "from-J": _frame_from_J_descriptor,
}


def frame_from_descriptor(d: Mapping) -> FrameGenerator:
    d = dict(d)
    return FRAMES[d.pop("name")](**d)


def _floer_from_descriptor(hamiltonian: Mapping, structure: Mapping | None = None) -> FieldSpec:
    J = structure_from_descriptor(structure) if structure else None
    return floer_field(hamiltonian_from_descriptor(hamiltonian), J)


FIELDS = {"floer": _floer_from_descriptor, "linear": linear_field, "delay": delay_field}


def field_from_descriptor(d: Mapping) -> FieldSpec:
    d = dict(d)
    return FIELDS[d.pop("name")](**d)


def register(catalog: dict, name: str, factory: Callable):
    """Add a user-defined entry to one of the catalogs above."""
    catalog[name] = factory
