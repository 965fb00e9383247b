"""Uniform bounds for families of flow lines and extraction of convergent subsequences.

Measured norms of discrete trajectories are tabulated next to the explicit bounds that
the bootstrap argument produces from ``kappa``, ``c0`` and ``c1`` (or ``c1'`` in the
elementary case).  Levels follow the axiom suite: ``H_k = W^{k+offset,2}`` with offset 0
for the trivial frame and 1 otherwise.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .flow import Trajectory, ds_derivative, field_values, interior, residual, s_integral
from .frames import (
    FieldSpec,
    FrameGenerator,
    UnsupportedFieldError,
    field_from_descriptor,
    frame_apply_raw,
    frame_differential_raw,
    remainder_explicit_raw,
    trivial_frame,
)
from .loop_space import fundamental_multipliers, oversampled, weighted_norm
from .scale_space import dense_level_norm, dense_tail_norm

DEFECT_TOL = 1e-6


# ---------------------------------------------------------------------------
# bump, cutoff and mollification


def _raw_bump(sigma):
    sigma = np.asarray(sigma, dtype=float)
    inside = np.abs(sigma) < 1
    safe = np.where(inside, sigma, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)


BUMP_CONSTANT = 1.0 / quad(lambda s: float(_raw_bump(s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
_BUMP_L2SQ = quad(lambda s: float(BUMP_CONSTANT * _raw_bump(s)) ** 2, -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(80)


def bump(sigma):
    """``rho(sigma) = C exp(-1/(1 - sigma^2))`` on ``(-1, 1)``, zero outside, unit mass."""
    return BUMP_CONSTANT * _raw_bump(sigma)


def smooth_step(u):
    """``int_{-1}^{2u-1} rho``: 0 for ``u <= 0``, 1 for ``u >= 1``; Gauss-Legendre in between."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    b = 2 * u - 1
    half = (b + 1) / 2
    nodes = half[..., None] * _GL_NODES + (half[..., None] - 1)
    return np.sum(_GL_WEIGHTS * bump(nodes), axis=-1) * half


@dataclass(frozen=True)
class MollifierSpec:
    """Cutoff ``beta``: 1 on ``[-T', T']``, 0 outside ``(-(T - eps), T - eps)``, ``eps = (T - T')/2``."""

    T_inner: float
    T: float

    @property
    def eps(self) -> float:
        return 0.5 * (self.T - self.T_inner)

    @staticmethod
    def rho(sigma):
        return bump(sigma)

    def beta(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return smooth_step((self.T_inner + self.eps - s) / self.eps)

    def dbeta(self, s):
        s = np.asarray(s, dtype=float)
        u = (self.T_inner + self.eps - np.abs(s)) / self.eps
        return -np.sign(s) * 2 * bump(2 * u - 1) / self.eps

    @property
    def dbeta_sup(self) -> float:
        return 2 * BUMP_CONSTANT * np.exp(-1.0) / self.eps

    @property
    def dbeta_l2(self) -> float:
        # two transition layers, each contributing (2/eps) int rho^2
        return float(np.sqrt(4.0 / self.eps * _BUMP_L2SQ))


def cutoff(T_inner: float, T: float) -> MollifierSpec:
    if not 0 < T_inner < T:
        raise ValueError(f"cutoff needs 0 < T' < T, got T' = {T_inner}, T = {T}")
    return MollifierSpec(float(T_inner), float(T))


def mollify(u: np.ndarray, s: np.ndarray, delta: float, spec: MollifierSpec) -> np.ndarray:
    """``rho_delta * (beta u)`` on the grid ``s`` (axis 0 of ``u``), extended by zero.

    The discrete kernel is normalized to unit sum, so constants on the plateau are
    reproduced exactly.
    """
    s = np.asarray(s, dtype=float)
    h = s[1] - s[0]
    if not delta < spec.eps:
        raise ValueError(f"delta = {delta} must be below (T - T')/2 = {spec.eps}")
    if delta < 8 * h:
        raise ValueError(f"delta = {delta} is under-resolved: need at least 8 samples per delta (h = {h})")
    u = np.asarray(u)
    bu = spec.beta(s).reshape((-1,) + (1,) * (u.ndim - 1)) * u
    m = int(np.floor(delta / h))
    offsets = np.arange(-m, m + 1)
    kernel = bump(offsets * h / delta)
    kernel = kernel / kernel.sum()
    out = np.zeros_like(bu)
    S = len(s)
    for k, wk in zip(offsets, kernel):
        if wk == 0.0:
            continue
        # out[i] += w_k * bu[i - k]
        lo, hi = max(0, k), min(S, S + k)
        out[lo:hi] += wk * bu[lo - k : hi - k]
    return out


# ---------------------------------------------------------------------------
# helpers on s-sampled coefficient families


def _offset(frame: FrameGenerator | None, offset):
    if offset is not None:
        return offset
    return 0 if frame is None or frame.identity else 1


def _norms(values, w: Trajectory, k) -> np.ndarray:
    return weighted_norm(values, w.N, w.period, k)


def window(w: Trajectory, T_inner: float) -> slice:
    """Grid samples in ``[-T', T']``; ``T'`` has to be a grid point."""
    pos = (w.T - T_inner) / w.ds
    i = int(round(pos))
    if abs(pos - i) > 1e-9 or not 0 < T_inner <= w.T:
        raise ValueError(f"T' = {T_inner} is not a grid point of the s-grid with ds = {w.ds}")
    return slice(i, w.S - i)


def _l2(values, h) -> float:
    return float(np.sqrt(max(s_integral(np.asarray(values) ** 2, h), 0.0)))


def _M(w: Trajectory) -> int:
    return oversampled(w.N)


def xi_compute(frame: FrameGenerator, spec: FieldSpec, w: Trajectory) -> np.ndarray:
    """``xi(s) = Phi(w(s)) V(w(s))`` for every sample."""
    V = field_values(spec, w)
    if frame.identity:
        return V
    return frame_apply_raw(frame, w.states, V, w.period, w.N, _M(w), w.boundary)


# ---------------------------------------------------------------------------
# norm ledgers


@dataclass
class NormLedger:
    """Measured quantities, the constants in force and the bounds derived from them."""

    kind: str
    constants: dict
    measured: dict
    bounds: dict
    formulas: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for key in sorted(self.bounds):
            m, b = self.measured[key], self.bounds[key]
            out.append({"quantity": key, "measured": m, "bound": b, "margin": b - m, "passed": bool(m <= b * (1 + 1e-12))})
        return out

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "constants": self.constants,
            "measured": self.measured,
            "bounds": self.bounds,
            "formulas": self.formulas,
            "checks": self.rows(),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["quantity", "measured", "bound", "margin", "passed"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


def bootstrap_ledger(
    frame: FrameGenerator, spec: FieldSpec, w: Trajectory, T_inner: float, c0: float, c1: float, offset=None
) -> NormLedger:
    """Uniform ``C^0 H_1 / C^1 H_0`` bounds propagated to the second-order norms on ``I_T'``."""
    k = _offset(frame, offset)
    h, T = w.ds, w.T
    win = window(w, T_inner)
    d = field_values(spec, w)
    xi = xi_compute(frame, spec, w)
    dxi = ds_derivative(xi, h)
    d2 = ds_derivative(d, h)

    nH1, nH0, dH0 = _norms(w.states, w, 1 + k), _norms(w.states, w, k), _norms(d, w, k)
    measured = {
        "w_C0_H1": float(nH1.max()),
        "w_C1_H0": float(max(nH0.max(), dH0.max())),
        "xi_C0_H0": float(_norms(xi, w, k).max()),
        "dxi_L2_H0": _l2(_norms(dxi, w, k)[win], h),
        "xi_L2_H1": _l2(_norms(xi, w, 1 + k)[win], h),
        "w_W22_H0": float(np.sqrt(sum(_l2(v[win], h) ** 2 for v in (_norms(d2, w, k), dH0, nH0)))),
        "w_W12_H1": float(np.sqrt(sum(_l2(v[win], h) ** 2 for v in (_norms(d, w, 1 + k), nH1)))),
        "w_L2_H2": _l2(_norms(w.states, w, 2 + k)[win], h),
    }
    kappa = max(measured["w_C0_H1"], measured["w_C1_H0"])
    beta = cutoff(T_inner, T).dbeta_l2
    r = np.sqrt(2 * T)
    mu = max(np.sqrt(2 * T_inner), 1.0)
    xi_bound = c0 * kappa * (beta + r * (kappa + c1))
    kappa0 = np.sqrt(c0**4 * kappa**2 * (beta + r * (c1 + 2 * kappa)) ** 2 + 2 * T * kappa**2)
    kappa1 = np.sqrt(c0**4 * kappa**2 * (beta + 2 * r * (kappa + c1)) ** 2 + 2 * T * kappa**2)
    kappa2 = c1 * mu * (kappa1 + 1)
    bounds = {
        "w_C0_H1": kappa,
        "w_C1_H0": kappa,
        "xi_C0_H0": c0 * kappa,
        "dxi_L2_H0": xi_bound,
        "xi_L2_H1": xi_bound,
        "w_W22_H0": float(kappa0),
        "w_W12_H1": float(kappa1),
        "w_L2_H2": float(kappa2),
    }
    constants = {"kappa": kappa, "c0": c0, "c1": c1, "T": T, "T_inner": T_inner, "level_offset": k}
    formulas = {
        "dbeta_l2": beta,
        "mu": mu,
        "kappa0": {"value": float(kappa0), "expr": "sqrt(c0^4 kappa^2 (|dbeta|_2 + sqrt(2T)(c1 + 2 kappa))^2 + 2T kappa^2)"},
        "kappa1": {"value": float(kappa1), "expr": "sqrt(c0^4 kappa^2 (|dbeta|_2 + 2 sqrt(2T)(kappa + c1))^2 + 2T kappa^2)"},
        "kappa2": {"value": float(kappa2), "expr": "c1 mu (kappa1 + 1), mu = max(sqrt(2T'), 1)"},
        "xi": {"value": float(xi_bound), "expr": "c0 kappa (|dbeta|_2 + sqrt(2T)(kappa + c1))"},
    }
    return NormLedger("bootstrap", constants, measured, {k_: float(v) for k_, v in bounds.items()}, formulas)


def elementary_ledger(spec: FieldSpec, w: Trajectory, T_inner: float, c1_prime: float) -> NormLedger:
    """Bounds from ``kappa = ||ds w||_{L^2(I_T, H_0)}`` alone, for elementary fields."""
    if not spec.elementary:
        raise UnsupportedFieldError("the elementary ledger needs an elementary field (J = i)")
    h, T = w.ds, w.T
    win = window(w, T_inner)
    d = field_values(spec, w)
    dd = ds_derivative(d, h)
    nH0, nH1, dH0, dH1 = (_norms(w.states, w, 0), _norms(w.states, w, 1), _norms(d, w, 0), _norms(d, w, 1))
    kappa = _l2(dH0, h)
    measured = {
        "w_L2_H1": _l2(nH1, h),
        "w_W12_H0": float(np.sqrt(_l2(nH0, h) ** 2 + kappa**2)),
        "dxi_L2_H0": _l2(_norms(dd, w, 0)[win], h),
        "xi_L2_H1": _l2(dH1[win], h),
        "w_W22_H0": float(np.sqrt(sum(_l2(v[win], h) ** 2 for v in (_norms(dd, w, 0), dH0, nH0)))),
        "w_W12_H1": float(np.sqrt(sum(_l2(v[win], h) ** 2 for v in (dH1, nH1)))),
        "w_L2_H2": _l2(_norms(w.states, w, 2)[win], h),
    }
    c = c1_prime
    kL = float(np.sqrt(c**2 * (kappa + np.sqrt(2 * T)) ** 2 + kappa**2))
    B = cutoff(T_inner, T).dbeta_sup + c
    second = kL * np.sqrt(B**2 + 1)
    bounds = {
        "w_L2_H1": c * (kappa + np.sqrt(2 * T)),
        "w_W12_H0": kL,
        "dxi_L2_H0": kL * B,
        "xi_L2_H1": kL * B,
        "w_W22_H0": second,
        "w_W12_H1": second,
        "w_L2_H2": c * (2 * second + 1),
    }
    constants = {"kappa": kappa, "c1_prime": c, "T": T, "T_inner": T_inner, "level_offset": 0}
    formulas = {
        "kappa_energy": {"value": kL, "expr": "sqrt(c1'^2 (kappa + sqrt(2T))^2 + kappa^2)"},
        "dbeta_sup": B - c,
        "second_order": {"value": float(second), "expr": "kappa_energy sqrt((|dbeta|_inf + c1')^2 + 1)"},
    }
    return NormLedger("elementary", constants, measured, {k_: float(v) for k_, v in bounds.items()}, formulas)


# ---------------------------------------------------------------------------
# identity defects along trajectories


def _fundamental(values, w: Trajectory):
    return fundamental_multipliers(w.N, w.period)[:, None] * values


def xi_equation_defect(frame: FrameGenerator, spec: FieldSpec, w: Trajectory, level=None) -> dict:
    """``ds xi - [DPhi(w)(Phi^{-1} xi, Phi^{-1} xi) + P(w) xi + F xi]`` on interior samples."""
    k = _offset(frame, level)
    M = _M(w)
    xi = xi_compute(frame, spec, w)
    dxi = ds_derivative(xi, w.ds)
    y = xi if frame.identity else frame_apply_raw(frame, w.states, xi, w.period, w.N, M, w.boundary, inverse=True)
    rhs = remainder_explicit_raw(spec, frame, w.states, xi, w.period, w.N, M, w.boundary) + _fundamental(xi, w)
    if not frame.identity:
        rhs = rhs + frame_differential_raw(frame, w.states, y, y, w.period, w.N, M, w.boundary)
    return _defect_report(dxi - rhs, w, k)


def second_derivative_defect(frame: FrameGenerator, spec: FieldSpec, w: Trajectory, level=None) -> dict:
    """``ds^2 w - [Phi(w)^{-1} ds xi - Phi(w)^{-1} DPhi(w)(ds w, ds w)]`` on interior samples."""
    k = _offset(frame, level)
    M = _M(w)
    d = field_values(spec, w)
    d2 = ds_derivative(d, w.ds)
    dxi = ds_derivative(xi_compute(frame, spec, w), w.ds)
    if frame.identity:
        rhs = dxi
    else:
        inner = dxi - frame_differential_raw(frame, w.states, d, d, w.period, w.N, M, w.boundary)
        rhs = frame_apply_raw(frame, w.states, inner, w.period, w.N, M, w.boundary, inverse=True)
    return _defect_report(d2 - rhs, w, k)


def elementary_xi_defect(spec: FieldSpec, w: Trajectory) -> dict:
    """``ds xi - (F xi + P(w) xi)`` with ``xi = ds w`` and the trivial frame."""
    if not spec.elementary:
        raise UnsupportedFieldError("the elementary equation needs an elementary field (J = i)")
    return xi_equation_defect(trivial_frame(spec.n), spec, w, level=0)


def _defect_report(diff, w: Trajectory, k) -> dict:
    vals = _norms(diff, w, k)[interior(w.S)]
    return {"defect": float(vals.max()), "S": w.S, "level": k, "tol": DEFECT_TOL, "passed": bool(vals.max() <= DEFECT_TOL)}


def refinement_ratio(coarse: dict, fine: dict) -> float:
    return coarse["defect"] / max(fine["defect"], 1e-300)


# ---------------------------------------------------------------------------
# tails of bounded families


def tail_threshold(c: float, T: float, p: float, f, N: int) -> float:
    """``eps(N) = 2c max{f(N+1)^{-(p-1)/(2p)}, f(N+1)^{-1/2} T^{-1/p}}``.

    If a tail at level ``H_{l-1-j}`` reaches ``eps`` at some ``s``, Holder continuity
    keeps it above ``eps/2`` on an interval of length ``min{(eps/2c)^{p/(p-1)}, T}``,
    which forces ``||w||_{W^{j,p}(I_T, H_{l-j})}`` above ``c`` unless ``eps <= eps(N)``.
    """
    if p <= 1:
        raise ValueError(f"the tail threshold needs p > 1, got p = {p}")
    fN = float(f(N + 1))
    return float(2 * c * max(fN ** (-(p - 1) / (2 * p)), fN**-0.5 * T ** (-1.0 / p)))


def _lp(values, h, p) -> float:
    return float(max(s_integral(np.abs(values) ** p, h), 0.0) ** (1.0 / p))


def family_bound(family: np.ndarray, weights: np.ndarray, T: float, p: float = 2, ell: int = 2) -> float:
    """``max_k ||w||_{W^{k,p}(I_T, H_{l-k})}`` over the family (``(members, S, K)`` real coordinates)."""
    family = np.asarray(family, dtype=float)
    S = family.shape[1]
    h = 2 * T / (S - 1)
    best = 0.0
    for u in family:
        derivs = [u]
        for _ in range(ell):
            derivs.append(ds_derivative(derivs[-1], h))
        for k in range(ell + 1):
            level = ell - k
            total = sum(_lp(dense_level_norm(dv, weights, level), h, p) ** p for dv in derivs[: k + 1])
            best = max(best, total ** (1.0 / p))
    return float(best)


def tail_verify(family: np.ndarray, weights: np.ndarray, T: float, ladder, p: float = 2, ell: int = 2, c=None) -> dict:
    """Sup over the family and the s-grid of ``||(id - pi_N) ds^j w(s)||_{H_{l-1-j}}`` against ``eps(N)``."""
    family = np.asarray(family, dtype=float)
    weights = np.asarray(weights, dtype=float)
    S = family.shape[1]
    h = 2 * T / (S - 1)
    c = family_bound(family, weights, T, p, ell) if c is None else float(c)
    f = lambda nu: weights[int(nu) - 1] if int(nu) <= len(weights) else np.inf
    rows = []
    for N in ladder:
        eps = tail_threshold(c, T, p, f, N)
        worst = 0.0
        for u in family:
            dv = u
            for j in range(ell):
                worst = max(worst, float(dense_tail_norm(dv, weights, N, ell - 1 - j).max()))
                dv = ds_derivative(dv, h)
        rows.append({"N": int(N), "eps": eps, "max_tail": worst, "passed": bool(worst <= eps)})
    eps_values = [r["eps"] for r in rows]
    decreasing = all(b <= a for a, b in zip(eps_values, eps_values[1:])) and eps_values[-1] < eps_values[0]
    return {"c": c, "T": T, "p": p, "ell": ell, "ladder": rows, "eps_decreasing": bool(decreasing),
            "passed": bool(decreasing and all(r["passed"] for r in rows))}


# ---------------------------------------------------------------------------
# metric and extraction


def trajectory_metric(w: Trajectory, v: Trajectory, T_inner: float, offset: int = 0) -> float:
    """Grid maximum over ``[-T', T']`` of ``||w - v||_{H_1}``, ``||w - v||_{H_0}`` and
    ``||ds w - ds v||_{H_0}`` (finite-difference derivatives)."""
    if (w.S, w.T, w.N, w.n, w.boundary, w.period) != (v.S, v.T, v.N, v.n, v.boundary, v.period):
        raise ValueError("trajectories live on different discretizations")
    win = window(w, T_inner)
    diff = w.states - v.states
    d = ds_derivative(diff, w.ds)
    vals = np.maximum(np.maximum(_norms(diff, w, 1 + offset), _norms(diff, w, offset)), _norms(d, w, offset))
    return float(vals[win].max())


def _pairwise(family, T_inner, offset):
    m = len(family)
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = trajectory_metric(family[i], family[j], T_inner, offset)
    return D


def _largest_cluster(members, D, tol):
    """Greedy net of radius ``tol`` built from the latest member backwards."""
    centers, clusters = [], []
    for i in reversed(members):
        for c, cl in zip(centers, clusters):
            if D[i, c] <= tol:
                cl.append(i)
                break
        else:
            centers.append(i)
            clusters.append([i])
    # ties go to the cluster holding the latest index, i.e. the first one built
    best = max(clusters, key=len)
    return sorted(best)


def _chain(members, D, tol):
    """Subsequence ending at the latest member whose gaps shrink strictly (or vanish)."""
    chain, gap = [members[-1]], 0.0
    for i in reversed(members[:-1]):
        d = D[i, chain[0]]
        if d < tol and (d > gap or d == gap == 0.0):
            chain.insert(0, i)
            gap = d
    gaps = [float(D[a, b]) for a, b in zip(chain, chain[1:])]
    return chain, gaps


def extract_convergent(family, T_ladder, tol, spec: FieldSpec | None = None, residual_tol: float = 1e-6,
                       offset: int = 0, min_length: int = 3):
    """Diagonal selection of a Cauchy subsequence along an increasing ladder of windows.

    Returns ``(indices, limit, report)``; the limit candidate is the last member of the
    selected chain, certified by its residual.
    """
    family = list(family)
    ladder = sorted(float(t) for t in T_ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("the window ladder must be strictly increasing")
    members = list(range(len(family)))
    rungs = []
    gaps = []
    for Tp in ladder:
        D = _pairwise(family, Tp, offset)
        members = _largest_cluster(members, D, tol)
        members, gaps = _chain(members, D, tol)
        rungs.append({"T_inner": Tp, "indices": list(members), "gaps": gaps})
        if len(members) < min_length:
            break
    report = {"tol": tol, "ladder": rungs, "indices": list(members), "gaps": gaps}
    if len(members) < min_length:
        report.update({"inconclusive": True, "passed": False, "limit_residual": None})
        return members, None, report
    limit = family[members[-1]]
    if spec is None:
        spec = field_from_descriptor(limit.spec)
    res = residual(spec, limit)
    strictly = all(b < a for a, b in zip(gaps, gaps[1:])) or all(g == 0.0 for g in gaps)
    report.update({
        "inconclusive": False,
        "limit_index": members[-1],
        "limit_residual": res,
        "residual_tol": residual_tol,
        "gaps_decreasing": bool(strictly),
        "passed": bool(res <= residual_tol and strictly and max(gaps, default=0.0) < tol),
    })
    return members, limit, report
