"""Galerkin-truncated gradient flow ``dw/ds = V(w)`` on ``I_T = (-T, T)``.

The forward flow is exponentially unstable in positive Fourier modes and the
backward flow in negative ones.  Integration therefore runs on short windows with a
blow-up ceiling; families of bounded trajectories come from low-mode data and from
radial Hamiltonians, for which single-mode loops stay single-mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .frames import FieldSpec, UnsupportedFieldError, loglog_slope, vf_eval_raw
from .loop_space import (
    PERIODIC,
    FourierPath,
    frequencies,
    oversampled,
    synth,
    to_real,
    weighted_inner,
    weighted_norm,
)


class FlowBlowUpError(RuntimeError):
    def __init__(self, s, norm, ceiling):
        super().__init__(f"state norm {norm:.3e} exceeded ceiling {ceiling:.3e} at s = {s:+.4f}")
        self.s, self.norm, self.ceiling = s, norm, ceiling


@dataclass
class FlowConfig:
    integrator: str = "etdrk4"  # or "adaptive"
    ds: float = 2.0**-8
    rtol: float = 1e-11
    atol: float = 1e-13
    samples: int | None = None  # output samples on [-T, T]; odd
    M: int | None = None
    ceiling: float = 1e8
    linear_part: str = "full"  # or "fundamental"
    contour_points: int = 32

    def __post_init__(self):
        if self.integrator not in ("etdrk4", "adaptive"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.ds <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step and tolerances must be positive")
        if self.linear_part not in ("full", "fundamental"):
            raise ValueError(f"unknown linear part {self.linear_part!r}")


@dataclass
class Trajectory:
    """States ``w(s_m)`` on the uniform grid ``s_m`` of ``[-T, T]``.

    ``states`` has shape ``(S, 2N+1, n)``.  ``policy`` is ``"field"`` when the
    s-derivative is taken to be ``V(w)`` and ``"fd"`` when it is computed by
    finite differences.
    """

    T: float
    states: np.ndarray
    boundary: str = PERIODIC
    period: float = 1.0
    policy: str = "field"
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=complex)
        if self.T <= 0 or self.S < 4:
            raise ValueError("trajectories need T > 0 and at least 4 samples")

    @property
    def S(self) -> int:
        return self.states.shape[0]

    @property
    def N(self) -> int:
        return (self.states.shape[1] - 1) // 2

    @property
    def n(self) -> int:
        return self.states.shape[2]

    @property
    def s(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.S)

    @property
    def ds(self) -> float:
        return 2 * self.T / (self.S - 1)

    def state(self, i: int) -> FourierPath:
        return FourierPath(self.states[i], self.boundary, self.period)

    def with_states(self, states, policy=None) -> "Trajectory":
        return Trajectory(self.T, states, self.boundary, self.period, policy or self.policy, dict(self.spec))

    def to_jsonl(self) -> str:
        head = {
            "type": "header",
            "T": self.T,
            "S": self.S,
            "N": self.N,
            "n": self.n,
            "boundary": self.boundary,
            "period": self.period,
            "policy": self.policy,
            "spec": self.spec,
        }
        lines = [json.dumps(head, sort_keys=True)]
        for i, s in enumerate(self.s):
            rows = [[[float(z.real), float(z.imag)] for z in row] for row in self.states[i]]
            lines.append(json.dumps({"index": i, "s": float(s), "coeffs": rows}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trajectory":
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        head, body = lines[0], lines[1:]
        if head.get("type") != "header" or len(body) != head["S"]:
            raise ValueError("malformed trajectory stream")
        states = np.array([[[complex(a, b) for a, b in row] for row in rec["coeffs"]] for rec in body])
        return cls(head["T"], states, head["boundary"], head["period"], head["policy"], head["spec"])


# ---------------------------------------------------------------------------
# s-derivatives and quadrature


def ds_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Order-4 centered differences inside, order 2 in the two layers at each end."""
    f = np.asarray(values)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[1] = (f[2] - f[0]) / (2 * h)
    d[-2] = (f[-1] - f[-3]) / (2 * h)
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return d


def ds_second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    f = np.asarray(values)
    d = np.empty_like(f)
    d[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    d[1] = (f[0] - 2 * f[1] + f[2]) / (h * h)
    d[-2] = (f[-3] - 2 * f[-2] + f[-1]) / (h * h)
    d[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / (h * h)
    d[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / (h * h)
    return d


def interior(S: int) -> slice:
    """Samples where the order-4 stencils apply."""
    return slice(2, S - 2)


def s_integral(values: np.ndarray, h: float) -> float:
    """Composite Simpson rule over the uniform s-grid."""
    return float(simpson(np.asarray(values, dtype=float), dx=h))


def field_values(spec: FieldSpec, w: Trajectory, M=None) -> np.ndarray:
    M = oversampled(w.N) if M is None else M
    return vf_eval_raw(spec, w.states, w.period, w.N, M, w.boundary)


def s_derivative(spec: FieldSpec | None, w: Trajectory) -> np.ndarray:
    """``ds w`` by the trajectory's policy."""
    if w.policy == "field":
        return field_values(spec, w)
    return ds_derivative(w.states, w.ds)


# ---------------------------------------------------------------------------
# action and gradient


def _require_elementary_floer(spec: FieldSpec):
    if spec.kind != "floer" or not spec.structure.standard:
        raise UnsupportedFieldError("the action is only available for Floer fields with J = i")


def action_eval(spec: FieldSpec, x: FourierPath, M=None) -> float:
    """``A(x) = 1/2 <i dx/dt, x>_0 + int_0^1 H_t(x(t)) dt`` with ``-grad_0 A = V``."""
    _require_elementary_floer(spec)
    return float(action_raw(spec, x.coeffs, x.period, M))


def action_raw(spec: FieldSpec, coeffs: np.ndarray, period: float = 1.0, M=None) -> np.ndarray:
    N = (np.shape(coeffs)[-2] - 1) // 2
    M = oversampled(N) if M is None else M
    # i d/dt multiplies mode j by -2 pi j / P
    kinetic = -0.5 * np.sum(frequencies(N, period)[:, None] * np.abs(coeffs) ** 2, axis=(-2, -1))
    t = period * np.arange(M) / M
    H = spec.hamiltonian.value(t, to_real(synth(coeffs, M)))
    return kinetic + H.mean(axis=-1)


def gradient_check(spec: FieldSpec, x: FourierPath, directions, eps=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4),
                   tol: float = 1e-6, slope_min: float = 1.9) -> dict:
    """Compare ``<-V(x), h>_0`` with central differences of the action along ``h``."""
    _require_elementary_floer(spec)
    M = oversampled(x.N)
    V = vf_eval_raw(spec, x.coeffs, x.period, x.N, M, x.boundary)
    rows = []
    for h in directions:
        exact = float(weighted_inner(-V, h.coeffs, x.N, x.period))
        errs = []
        for e in eps:
            fd = (action_raw(spec, x.coeffs + e * h.coeffs, x.period, M) - action_raw(spec, x.coeffs - e * h.coeffs, x.period, M)) / (2 * e)
            errs.append(abs(float(fd) - exact))
        scale = max(1.0, abs(exact))
        slope = loglog_slope(eps, errs, floor=1e-11 * scale)
        agreement = errs[list(eps).index(1e-4)] if 1e-4 in eps else errs[-1]
        rows.append({"directional": exact, "errors": errs, "slope": slope, "agreement": agreement,
                     "passed": agreement <= tol and slope >= slope_min})
    return {"eps": list(eps), "directions": rows, "passed": all(r["passed"] for r in rows)}


# ---------------------------------------------------------------------------
# integration


def linear_multipliers(spec: FieldSpec, N: int, n: int, period: float, part: str = "full") -> np.ndarray:
    """Diagonal linear part ``L`` with ``V(x) = L x + (remainder)``, shape ``(2N+1, n)``."""
    lam = frequencies(N, period).astype(complex) if spec.structure.standard else np.zeros(2 * N + 1, complex)
    if part == "full":
        for term in spec.terms:
            lam = lam - term.gamma * np.exp(-1j * frequencies(N, period) * term.tau)
    return np.repeat(lam[:, None], n, axis=1)


def _etd_coefficients(L: np.ndarray, h: float, points: int):
    # full circle: L is complex, so the half-circle/real-part shortcut does not apply
    r = np.exp(2j * np.pi * (np.arange(1, points + 1) - 0.5) / points)
    LR = h * L[..., None] + r
    E = np.exp(h * L)
    E2 = np.exp(h * L / 2)
    Q = h * np.mean((np.exp(LR / 2) - 1) / LR, axis=-1)
    f1 = h * np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=-1)
    f2 = h * np.mean((2 + LR + np.exp(LR) * (LR - 2)) / LR**3, axis=-1)
    f3 = h * np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=-1)
    return E, E2, Q, f1, f2, f3


def _etdrk4(rhs, L, x0, h, steps, stride, ceiling, sign, cfg):
    E, E2, Q, f1, f2, f3 = _etd_coefficients(L, h, cfg.contour_points)
    nonlin = lambda v: rhs(v) - L * v
    out = [x0]
    v = x0
    for k in range(1, steps + 1):
        Nv = nonlin(v)
        a = E2 * v + Q * Nv
        Na = nonlin(a)
        b = E2 * v + Q * Na
        Nb = nonlin(b)
        c = E2 * a + Q * (2 * Nb - Nv)
        Nc = nonlin(c)
        v = E * v + Nv * f1 + 2 * (Na + Nb) * f2 + Nc * f3
        norm = float(np.sqrt(np.sum(np.abs(v) ** 2)))
        if not np.isfinite(norm) or norm > ceiling:
            raise FlowBlowUpError(sign * k * h, norm, ceiling)
        if k % stride == 0:
            out.append(v)
    return out


def _adaptive(rhs, x0, T, half, ceiling, sign, cfg):
    shape = x0.shape

    def f(s, y):
        z = y[: y.size // 2] + 1j * y[y.size // 2 :]
        dz = rhs(z.reshape(shape)).ravel()
        return np.concatenate([dz.real, dz.imag])

    def blow(s, y):
        return ceiling - np.linalg.norm(y)

    blow.terminal = True
    y0 = np.concatenate([x0.ravel().real, x0.ravel().imag])
    ts = np.linspace(0.0, T, half + 1)
    sol = solve_ivp(f, (0.0, T), y0, method="DOP853", t_eval=ts, rtol=cfg.rtol, atol=cfg.atol, events=blow)
    if sol.status == 1 or not sol.success:
        s_end = sol.t[-1] if sol.t.size else 0.0
        raise FlowBlowUpError(sign * s_end, float(np.linalg.norm(sol.y[:, -1])) if sol.y.size else np.inf, ceiling)
    K = y0.size // 2
    return [(sol.y[:K, i] + 1j * sol.y[K:, i]).reshape(shape) for i in range(sol.y.shape[1])]


def integrate(spec: FieldSpec, x0: FourierPath, T: float, cfg: FlowConfig | None = None) -> Trajectory:
    """Trajectory on ``[-T, T]`` through ``x0`` at ``s = 0``; backward half integrates ``-V``."""
    cfg = cfg or FlowConfig()
    if spec.has_delay and x0.boundary != PERIODIC:
        raise UnsupportedFieldError("delay fields need periodic loops")
    N, n, period = x0.N, x0.n, x0.period
    M = oversampled(N) if cfg.M is None else cfg.M
    steps = max(1, int(np.ceil(T / cfg.ds - 1e-9)))
    S = cfg.samples if cfg.samples is not None else 2 * steps + 1
    if S % 2 == 0:
        raise ValueError("the number of output samples must be odd")
    half = (S - 1) // 2
    if cfg.integrator == "etdrk4":
        steps = int(np.ceil(steps / half)) * half
        stride = steps // half
        h = T / steps
    V = lambda v: vf_eval_raw(spec, v, period, N, M, x0.boundary)
    L = linear_multipliers(spec, N, n, period, cfg.linear_part)
    branches = []
    for sign in (+1, -1):
        rhs = (lambda v: V(v)) if sign > 0 else (lambda v: -V(v))
        if cfg.integrator == "etdrk4":
            branches.append(_etdrk4(rhs, sign * L, x0.coeffs, h, steps, stride, cfg.ceiling, sign, cfg))
        else:
            branches.append(_adaptive(rhs, x0.coeffs, T, half, cfg.ceiling, sign, cfg))
    forward, backward = branches
    states = np.array(backward[::-1] + forward[1:])
    return Trajectory(T, states, x0.boundary, period, "field", spec.descriptor())


def residual(spec: FieldSpec, w: Trajectory, level: float = 0) -> float:
    """Max over interior samples of ``|| ds w - V(w) ||_level`` with finite-difference ``ds w``."""
    d = ds_derivative(w.states, w.ds)
    V = field_values(spec, w)
    defect = weighted_norm(d - V, w.N, w.period, level)
    return float(np.max(defect[interior(w.S)]))


def action_profile(spec: FieldSpec, w: Trajectory) -> np.ndarray:
    _require_elementary_floer(spec)
    return action_raw(spec, w.states, w.period)


def energy_identity_check(spec: FieldSpec, w: Trajectory, tol: float = 1e-6) -> dict:
    """``A(w(-T)) - A(w(T))`` against ``int ||ds w||_0^2 ds`` (Simpson)."""
    A = action_profile(spec, w)
    drop = float(A[0] - A[-1])
    d = s_derivative(spec, w)
    energy = s_integral(weighted_norm(d, w.N, w.period, 0) ** 2, w.ds)
    mismatch = abs(drop - energy) / max(abs(drop), 1e-300)
    increments = np.diff(A)
    return {
        "action_drop": drop,
        "energy": energy,
        "mismatch": mismatch,
        "max_action_increase": float(max(increments.max(), 0.0)),
        "passed": mismatch <= tol,
    }


# ---------------------------------------------------------------------------
# closed-form oracle


def closed_form_multiplier(j, gamma, tau=0.0, period: float = 1.0):
    return 2 * np.pi * j / period - gamma * np.exp(-2j * np.pi * j * tau / period)


def closed_form_linear_flow(j, gamma, tau, x0, s, period: float = 1.0):
    """``exp((2 pi j - gamma e^{-2 pi i j tau}) s) x0`` for ``V(x) = -i dx/dt - gamma x(t - tau)``."""
    lam = closed_form_multiplier(j, gamma, tau, period)
    s = np.asarray(s, dtype=float)
    return np.exp(lam * s)[..., None] * np.atleast_1d(np.asarray(x0, dtype=complex))


def closed_form_trajectory(spec: FieldSpec, x0: FourierPath, T: float, S: int) -> Trajectory:
    """Exact trajectory of a linear (possibly delayed) field with ``J = i``."""
    if not spec.structure.standard or spec.kind == "floer" and spec.hamiltonian.name != "quadratic":
        raise UnsupportedFieldError("closed form needs a linear field with J = i")
    L = linear_multipliers(spec, x0.N, x0.n, x0.period, "full")
    s = np.linspace(-T, T, S)
    states = np.exp(L[None] * s[:, None, None]) * x0.coeffs[None]
    return Trajectory(T, states, x0.boundary, x0.period, "fd", spec.descriptor())
