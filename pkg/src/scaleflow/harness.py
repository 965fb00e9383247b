"""Scenario runner: TOML configs in, JSON/CSV reports and SVG plots out."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import compactness as cp
from . import families
from .flow import (
    FlowConfig,
    closed_form_linear_flow,
    closed_form_trajectory,
    energy_identity_check,
    gradient_check,
    integrate,
    residual,
)
from .frames import (
    AxiomConfig,
    axiom_suite,
    build_frame_from_J,
    bump_hamiltonian,
    conjugated_remainder,
    constant_conjugated_structure,
    delay_field,
    elementary_constant,
    field_from_descriptor,
    floer_field,
    frame_from_descriptor,
    hamiltonian_from_descriptor,
    loglog_slope,
    quadratic_hamiltonian,
    scalar_rotation_frame,
    structure_from_descriptor,
    trivial_frame,
    v3_constant,
)
from .loop_space import (
    FourierPath,
    LAGRANGIAN,
    check_lagrangian_bc,
    floer_fundamental,
    reflect_to_loop,
    restrict_to_path,
    sobolev_norm,
)
from .scale_space import ScaleVector, SignMap, WeightFunction, fundamental_apply, level_norm, tail_factor, tail_norm

SCHEMA = "scaleflow.report/1"
OUT_ENV = "SCALEFLOW_OUT"


class ConfigError(ValueError):
    """Malformed scenario or unknown catalog entry (exit code 2)."""


# ---------------------------------------------------------------------------
# scenario catalog


def _scenario_dir():
    return resources.files("scaleflow").joinpath("scenarios")


def bundled_scenarios() -> dict[str, Path]:
    out = {}
    for entry in _scenario_dir().iterdir():
        if entry.name.endswith(".toml"):
            out[entry.name[:-5]] = entry
    return dict(sorted(out.items()))


def load_scenario(ref: str) -> dict:
    """Parse a scenario from a file path or a bundled name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        catalog = bundled_scenarios()
        if ref not in catalog:
            raise ConfigError(f"no scenario file or bundled scenario named {ref!r}")
        text = catalog[ref].read_text()
    try:
        scen = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {ref}: {exc}") from exc
    validate(scen)
    return scen


def validate(scen: dict):
    for key in ("name", "checks"):
        if key not in scen:
            raise ConfigError(f"scenario is missing the {key!r} entry")
    if not isinstance(scen["checks"], list) or not scen["checks"]:
        raise ConfigError("'checks' must be a non-empty list")
    unknown = [c for c in scen["checks"] if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {sorted(CHECKS)}")
    if not isinstance(scen.get("seed", 0), int):
        raise ConfigError("'seed' must be an integer")
    for check in scen["checks"]:
        section = scen.get(check, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{check}] must be a table")
        ladder = section.get("ladder")
        if ladder is not None and any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(f"[{check}] ladder must be strictly increasing")


def describe(ref: str) -> str:
    scen = load_scenario(ref)
    lines = [f"{scen['name']}: {scen.get('summary', '').strip()}", ""]
    for check in scen["checks"]:
        lines.append(f"  {check}: {TOPICS[check]}")
    if "topics" in scen:
        lines.append("")
        lines.extend(f"  - {t}" for t in scen["topics"])
    if "budget_seconds" in scen:
        lines.append(f"\n  runtime budget: {scen['budget_seconds']} s")
    return "\n".join(lines)


TOPICS = {
    "energy": "action drop along gradient flow lines equals their L2 energy",
    "axioms": "moving-frame axioms (Phi1)-(Phi6) and field axioms (V1)-(V3) / (V3') on truncated loop spaces",
    "flow": "Galerkin flow by exponential time differencing against exact solutions of linear and delay fields",
    "lagrangian": "Lagrangian boundary conditions: reflection of paths to loops, endpoint derivative conditions",
    "isometry": "the fundamental operator as an isometry one level down the scale",
    "tails": "compact inclusions of the scale: tail gain f(N+1)^(-1/2) and uniform tails of bounded families",
    "ledger": "bootstrap of uniform C0/C1 bounds to second-order bounds; the elementary chain from an energy bound",
    "extract": "convergent subsequences of bounded families of flow lines by diagonal selection",
    "conjugation": "the bounded remainder P = Phi DV Phi^-1 - F by two evaluation paths",
    "gradient": "the Floer field as the negative L2 gradient of the action",
}


# ---------------------------------------------------------------------------
# checks; each returns a dict with "passed", "metrics", optional "rows" and "plot"


def _get(section, key, default):
    val = section.get(key, default)
    if default is not None and not isinstance(val, type(default)) and not (
        isinstance(default, float) and isinstance(val, int)
    ):
        raise ConfigError(f"entry {key!r} has type {type(val).__name__}, expected {type(default).__name__}")
    return val


def _pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def check_energy(sec, seed, jobs):
    gamma, T = _get(sec, "gamma", 1.0), _get(sec, "T", 1.0)
    N, S = _get(sec, "N", 4), _get(sec, "S", 513)
    tol = _get(sec, "rel_tol", 1e-6)
    spec = floer_field(quadratic_hamiltonian(1, gamma))
    x0 = FourierPath.single_mode(0, np.array([1.0]), N)
    w = closed_form_trajectory(spec, x0, T, S)
    w = w.with_states(w.states, policy="field")
    exact = 0.5 * (np.exp(2 * gamma * T) - np.exp(-2 * gamma * T))
    closed = energy_identity_check(spec, w, tol=1e-8)
    closed_ok = abs(closed["action_drop"] - exact) <= 1e-8 * exact and abs(closed["energy"] - exact) <= 1e-8 * exact
    count = _get(sec, "family", 4)
    _, fam = families.perturbed_quadratic_family(count=count, N=N, T=_get(sec, "family_T", 0.25), S=S, seed=seed)
    bump_spec = field_from_descriptor(fam[0].spec)
    reps = _pmap(lambda tr: energy_identity_check(bump_spec, tr, tol=tol), fam, jobs)
    rows = [{"member": i, **{k: r[k] for k in ("action_drop", "energy", "mismatch", "passed")}} for i, r in enumerate(reps)]
    metrics = {
        "closed_form": {"action_drop": closed["action_drop"], "energy": closed["energy"], "exact": exact},
        "worst_family_mismatch": max(r["mismatch"] for r in reps),
    }
    plot = {"kind": "lines", "title": "energy identity", "xlabel": "member", "ylabel": "value",
            "series": {"action drop": [r["action_drop"] for r in reps], "energy": [r["energy"] for r in reps]}}
    return {"passed": bool(closed_ok and all(r["passed"] for r in reps)), "metrics": metrics, "rows": rows, "plot": plot}


def check_axioms(sec, seed, jobs):
    frame = frame_from_descriptor(sec.get("frame", {"name": "trivial", "n": 1}))
    spec = field_from_descriptor(sec["field"]) if "field" in sec else None
    cfg = AxiomConfig(ladder=tuple(_get(sec, "ladder", [8, 16, 32])), seed=seed, kappa=_get(sec, "kappa", 1.0))
    expected_c1p = None
    if spec is not None and spec.elementary and frame.identity:
        expected_c1p = elementary_constant(spec.gamma, spec.c)
        cfg.c1_prime = expected_c1p
    rep = axiom_suite(frame, spec, cfg)
    passed = rep["passed"]
    if "expect_c0" in sec:
        passed = passed and abs(rep["c0"] - sec["expect_c0"]) <= 1e-10
    if "expect_c1_prime" in sec:
        passed = passed and expected_c1p is not None and abs(expected_c1p - sec["expect_c1_prime"]) <= 1e-12
    per_N = rep["checks"]["c0"]["per_N"]
    rows = [{"N": b["N"], "c0": b["c0"], "frame": b["frame"], "inverse": b["inverse"], "remainder": b["remainder"]} for b in per_N]
    metrics = {"c0": rep["c0"], "c1_prime": expected_c1p, "checks": {k: v["passed"] for k, v in rep["checks"].items()}}
    plot = {"kind": "lines", "title": "measured c0 along the ladder", "xlabel": "N", "ylabel": "c0",
            "x": [b["N"] for b in per_N], "series": {"c0": [b["c0"] for b in per_N]}}
    return {"passed": bool(passed), "metrics": metrics, "rows": rows, "plot": plot, "detail": rep}


def check_flow(sec, seed, jobs):
    N, T = _get(sec, "N", 4), _get(sec, "T", 1.0)
    ds = _get(sec, "ds", 2.0**-8)
    tol = _get(sec, "rel_tol", 1e-8)
    order_ds = _get(sec, "order_ds", [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7])
    order_min = _get(sec, "order_min", 3.8)
    rows, orders = [], []
    for j, gamma, tau in sec.get("cases", [[0, 1.0, 0.0], [1, 1.0, 0.5]]):
        spec = delay_field(1, [(tau, gamma)])
        x0 = FourierPath.single_mode(int(j), np.array([1.0]), N)
        w = integrate(spec, x0, T, FlowConfig(ds=ds))
        ex = closed_form_linear_flow(j, gamma, tau, [1.0], w.s)
        err = float(np.abs(w.states[:, N + int(j)] - ex).max() / np.abs(ex).max())
        errs = []
        for h in order_ds:
            wo = integrate(spec, x0, T, FlowConfig(ds=h, linear_part="fundamental", samples=17))
            exo = closed_form_linear_flow(j, gamma, tau, [1.0], wo.s)
            errs.append(float(np.abs(wo.states[:, N + int(j)] - exo).max() / np.abs(exo).max()))
        order = loglog_slope(order_ds, errs)
        orders.append(errs)
        lam = complex(2 * np.pi * j - gamma * np.exp(-2j * np.pi * j * tau))
        rows.append({"j": j, "gamma": gamma, "tau": tau, "multiplier_re": lam.real, "multiplier_im": lam.imag,
                     "rel_error": err, "order": order, "passed": bool(err <= tol and order >= order_min)})
    plot = {"kind": "loglog", "title": "ETD-RK4 error, fundamental linear part", "xlabel": "ds", "ylabel": "relative error",
            "x": order_ds, "series": {f"j={r['j']}, tau={r['tau']}": e for r, e in zip(rows, orders)}}
    metrics = {"max_rel_error": max(r["rel_error"] for r in rows), "min_order": min(r["order"] for r in rows)}
    return {"passed": all(r["passed"] for r in rows), "metrics": metrics, "rows": rows, "plot": plot}


def check_lagrangian(sec, seed, jobs):
    rng = np.random.default_rng(seed)
    N, count, n = _get(sec, "N", 12), _get(sec, "count", 50), _get(sec, "n", 2)
    kmax = _get(sec, "k", 3)
    worst_rt, bc_ok = 0.0, True
    for _ in range(count):
        c = rng.normal(size=(2 * N + 1, n)) / (1.0 + np.abs(np.arange(-N, N + 1)))[:, None] ** 3
        x = FourierPath(c, LAGRANGIAN)
        back = restrict_to_path(reflect_to_loop(x))
        worst_rt = max(worst_rt, float(np.abs(back.coeffs - x.coeffs).max() / np.abs(x.coeffs).max()))
        bc_ok = bc_ok and check_lagrangian_bc(back, kmax)["passed"]
    loop = reflect_to_loop(FourierPath(np.ones((2 * N + 1, n)) / (1.0 + np.arange(2 * N + 1))[:, None] ** 2, LAGRANGIAN))
    control = check_lagrangian_bc(loop * 1j, kmax)
    metrics = {"roundtrip": worst_rt, "bc_passed": bc_ok, "negative_control_distance": control["max_distance"],
               "negative_control_rejected": not control["passed"]}
    passed = worst_rt <= _get(sec, "roundtrip_tol", 1e-13) and bc_ok and not control["passed"]
    return {"passed": bool(passed), "metrics": metrics}


def check_isometry(sec, seed, jobs):
    rng = np.random.default_rng(seed)
    count, K = _get(sec, "count", 1000), _get(sec, "K", 64)
    tol = _get(sec, "rel_tol", 1e-12)
    weight = WeightFunction.floer_periodic(1)
    zeta = SignMap.floer(2)
    worst_scale = worst_loop = 0.0
    for _ in range(count):
        x = ScaleVector(rng.normal(size=K) / np.arange(1, K + 1), weight)
        k = float(rng.integers(-2, 3))
        lhs, rhs = level_norm(fundamental_apply(zeta, x), k), level_norm(x, k + 1)
        worst_scale = max(worst_scale, abs(lhs - rhs) / rhs)
        N = int(rng.integers(1, 17))
        c = (rng.normal(size=(2 * N + 1, 2)) + 1j * rng.normal(size=(2 * N + 1, 2))) / (1.0 + np.abs(np.arange(-N, N + 1)))[:, None]
        y = FourierPath(c)
        lhs, rhs = sobolev_norm(floer_fundamental(y), k), sobolev_norm(y, k + 1)
        worst_loop = max(worst_loop, abs(lhs - rhs) / rhs)
    metrics = {"scale_rel_error": worst_scale, "loop_rel_error": worst_loop}
    return {"passed": bool(max(worst_scale, worst_loop) <= tol), "metrics": metrics}


def check_tails(sec, seed, jobs):
    rng = np.random.default_rng(seed)
    count, K, Nmax = _get(sec, "count", 1000), _get(sec, "K", 96), _get(sec, "N_max", 64)
    weight = WeightFunction.power(1.0)
    worst = -np.inf
    for _ in range(count):
        x = ScaleVector(rng.normal(size=K) * rng.uniform(0.1, 10.0), weight)
        k = float(rng.integers(-1, 4))
        for N in range(0, Nmax + 1):
            lhs, rhs = tail_norm(x, N, k - 1), tail_factor(weight, N) * tail_norm(x, N, k)
            worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    T = _get(sec, "T", 0.1)
    fam, f = families.synthetic_decay_family(count=_get(sec, "family", 16), T=T, seed=seed)
    ladder = _get(sec, "ladder", [8, 16, 32, 64])
    rep = cp.tail_verify(fam, f, T, ladder)
    ratio = cp.tail_threshold(1.0, T, 2, lambda nu: nu, 64) / cp.tail_threshold(1.0, T, 2, lambda nu: nu, 8)
    rows = rep["ladder"]
    metrics = {"mechanism_excess": float(worst), "family_bound": rep["c"], "eps_ratio_64_8": ratio}
    plot = {"kind": "loglog", "title": "tails vs threshold", "xlabel": "N", "ylabel": "norm", "x": ladder,
            "series": {"eps(N)": [r["eps"] for r in rows], "max tail": [r["max_tail"] for r in rows]}}
    passed = worst <= 1e-14 and rep["passed"] and ratio < 0.5
    return {"passed": bool(passed), "metrics": metrics, "rows": rows, "plot": plot}


def _defect_pair(make, fn):
    coarse, fine = fn(make(513)), fn(make(1025))
    return {"coarse": coarse["defect"], "fine": fine["defect"], "ratio": cp.refinement_ratio(coarse, fine)}


def check_ledger(sec, seed, jobs):
    count, N = _get(sec, "count", 32), _get(sec, "N", 4)
    T, S = _get(sec, "T", 0.25), _get(sec, "S", 513)
    Tp = _get(sec, "T_inner", T / 2)
    spec, fam = families.perturbed_quadratic_family(count=count, N=N, T=T, S=S, seed=seed)
    res = _pmap(lambda w: residual(spec, w), fam, jobs)
    frame = trivial_frame(spec.n)
    c0 = axiom_suite(frame, None, AxiomConfig(ladder=(8,), samples=2))["c0"]
    kappa_family = max(cp.bootstrap_ledger(frame, spec, w, Tp, c0, 1.0).constants["kappa"] for w in fam)
    c1 = v3_constant(kappa_family, spec.gamma, spec.c - abs(spec.gamma))["c1"]
    c1p = elementary_constant(spec.gamma, spec.c)
    boot = _pmap(lambda w: cp.bootstrap_ledger(frame, spec, w, Tp, c0, c1), fam, jobs)
    elem = _pmap(lambda w: cp.elementary_ledger(spec, w, Tp, c1p), fam, jobs)
    rows = []
    for i, (b, e) in enumerate(zip(boot, elem)):
        for led in (b, e):
            for r in led.rows():
                rows.append({"member": i, "ledger": led.kind, **r})

    # identity defects under grid refinement
    refine = _get(sec, "refine_members", 8)

    def elem_family(S_):
        return families.perturbed_quadratic_family(count=refine, N=N, T=T, S=S_, seed=seed)[1]

    def worst(fn):
        return lambda trajs: max((fn(w) for w in trajs), key=lambda r: r["defect"])

    elem_defect = _defect_pair(elem_family, worst(lambda w: cp.elementary_xi_defect(spec, w)))
    specJ = floer_field(quadratic_hamiltonian(1, 1.0), constant_conjugated_structure(1))
    frameJ = build_frame_from_J(specJ.structure)
    c = np.zeros((2 * N + 1, 1), complex)
    c[N - 1 : N + 2, 0] = [-0.03, 0.05, 0.08j]
    xJ = FourierPath(c)
    specR = floer_field(bump_hamiltonian(1, 1.0, amplitude=0.5))
    frameR = scalar_rotation_frame(1, 1.0)
    xR = FourierPath.single_mode(1, np.array([0.08]), N)
    trajJ = lambda S_: integrate(specJ, xJ, T, FlowConfig(ds=2 * T / (S_ - 1), samples=S_))
    trajR = lambda S_: integrate(specR, xR, T, FlowConfig(ds=2 * T / (S_ - 1), samples=S_))
    defects = {
        "xi_elementary": elem_defect,
        "xi_conjugated_J": _defect_pair(trajJ, lambda w: cp.xi_equation_defect(frameJ, specJ, w)),
        "xi_rotation_frame": _defect_pair(trajR, lambda w: cp.xi_equation_defect(frameR, specR, w)),
        "second_rotation_frame": _defect_pair(trajR, lambda w: cp.second_derivative_defect(frameR, specR, w)),
    }
    ratio_min = _get(sec, "refine_ratio", 8.0)
    defects_ok = all(d["coarse"] <= cp.DEFECT_TOL and d["ratio"] >= ratio_min for d in defects.values())
    metrics = {
        "c0": c0, "c1": c1, "c1_prime": c1p, "kappa_family": kappa_family,
        "max_residual": max(res),
        "bootstrap_pass_rate": sum(b.passed for b in boot) / len(boot),
        "elementary_pass_rate": sum(e.passed for e in elem) / len(elem),
        "min_bootstrap_margin": min(r["margin"] for led in boot for r in led.rows()),
        "min_elementary_margin": min(r["margin"] for led in elem for r in led.rows()),
        "defects": defects,
    }
    quantities = sorted(boot[0].bounds)
    plot = {"kind": "ratio", "title": "bootstrap ledger: measured / bound", "xlabel": "member", "ylabel": "measured / bound",
            "series": {q: [b.measured[q] / max(b.bounds[q], 1e-300) for b in boot] for q in quantities}}
    passed = max(res) <= 1e-6 and all(b.passed for b in boot) and all(e.passed for e in elem) and defects_ok
    return {"passed": bool(passed), "metrics": metrics, "rows": rows, "plot": plot}


def check_extract(sec, seed, jobs):
    kind = _get(sec, "family", "shrinking")
    count, tol = _get(sec, "count", 32), _get(sec, "tol", 1.0)
    ladder = _get(sec, "ladder", [0.25, 0.5])
    if kind == "shrinking":
        spec, fam, _ = families.shrinking_family(count=count)
        expected = [list(range(count))]
    elif kind == "two-cluster":
        spec, fam = families.two_cluster_family(count=count)
        expected = [list(range(0, count, 2)), list(range(1, count, 2))]
    elif kind == "constant":
        spec, fam, base = families.shrinking_family(count=1)
        fam = [base] * count
        expected = [list(range(count))]
    else:
        raise ConfigError(f"unknown family {kind!r}")
    idx, limit, rep = cp.extract_convergent(fam, ladder, tol, spec=spec, residual_tol=_get(sec, "residual_tol", 1e-6))
    passed = rep["passed"] and idx in expected
    metrics = {"indices": idx, "limit_residual": rep["limit_residual"], "gaps": rep["gaps"], "inconclusive": rep["inconclusive"]}
    plot = {"kind": "semilogy", "title": "successive metric gaps", "xlabel": "chain position", "ylabel": "gap",
            "series": {"gap": rep["gaps"]}}
    return {"passed": bool(passed), "metrics": metrics, "plot": plot}


def check_conjugation(sec, seed, jobs):
    J = structure_from_descriptor(sec.get("structure", {"name": "squeezed", "n": 1, "eps": 0.3}))
    H = hamiltonian_from_descriptor(sec.get("hamiltonian", {"name": "bump", "n": 1, "gamma": 1.0, "modulation": 0.3}))
    spec, frame = floer_field(H, J), build_frame_from_J(J)
    scale = _get(sec, "scale", 0.3)
    ladder = _get(sec, "ladder", [8, 16, 32])

    def fixed(N, a):
        c = np.zeros((2 * N + 1, spec.n), complex)
        c[N - 2 : N + 3, 0] = a * np.array([0.1, 0.3j, 0.5, -0.2, 0.1j])
        return FourierPath(c)

    rows = []
    for N in ladder:
        x, xh = fixed(N, scale), fixed(N, 1.0)
        a = conjugated_remainder(spec, frame, x, xh, "explicit")
        b = conjugated_remainder(spec, frame, x, xh, "definition")
        rows.append({"N": N, "gap": sobolev_norm(a - b, 1) / sobolev_norm(a, 1)})
    gaps = {r["N"]: r["gap"] for r in rows}
    at = _get(sec, "at", 16)
    shrink = gaps[ladder[0]] / max(gaps[ladder[-1]], 1e-300)
    passed = gaps[at] <= _get(sec, "tol", 1e-9) and shrink >= _get(sec, "shrink", 10.0)
    plot = {"kind": "semilogy", "title": "explicit vs definition remainder", "xlabel": "N", "ylabel": "relative gap",
            "x": ladder, "series": {"gap": [r["gap"] for r in rows]}}
    return {"passed": bool(passed), "metrics": {"gaps": gaps, "shrink": shrink}, "rows": rows, "plot": plot}


def check_gradient(sec, seed, jobs):
    rng = np.random.default_rng(seed)
    N, count = _get(sec, "N", 6), _get(sec, "count", 4)
    tol = _get(sec, "tol", 1e-6)
    rows = []
    for desc in sec.get("hamiltonians", [{"name": "quadratic", "n": 1, "gamma": 1.0}]):
        spec = floer_field(hamiltonian_from_descriptor(desc))
        n = spec.n
        for _ in range(count):
            c = (rng.normal(size=(2 * N + 1, n)) + 1j * rng.normal(size=(2 * N + 1, n))) * 0.3
            c /= (1.0 + np.abs(np.arange(-N, N + 1)))[:, None] ** 2
            dirs = [FourierPath((rng.normal(size=c.shape) + 1j * rng.normal(size=c.shape)) * 0.1) for _ in range(3)]
            rep = gradient_check(spec, FourierPath(c), dirs, tol=tol)
            agreement = max(d["agreement"] for d in rep["directions"])
            slope = min(d["slope"] for d in rep["directions"])
            rows.append({"hamiltonian": desc["name"], "agreement": agreement, "slope": slope, "passed": rep["passed"]})
    metrics = {"worst_agreement": max(r["agreement"] for r in rows)}
    return {"passed": all(r["passed"] for r in rows), "metrics": metrics, "rows": rows}


CHECKS = {
    "energy": check_energy,
    "axioms": check_axioms,
    "flow": check_flow,
    "lagrangian": check_lagrangian,
    "isometry": check_isometry,
    "tails": check_tails,
    "ledger": check_ledger,
    "extract": check_extract,
    "conjugation": check_conjugation,
    "gradient": check_gradient,
}


# ---------------------------------------------------------------------------
# emission


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _csv(rows) -> str:
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(_clean(rows))
    return buf.getvalue()


def _svg(plot: dict, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "scaleflow", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, ys in plot["series"].items():
            xs = plot.get("x", list(range(len(ys))))
            if plot["kind"] == "loglog":
                ax.loglog(xs, ys, "o-", label=label)
            elif plot["kind"] == "semilogy":
                ax.semilogy(xs[: len(ys)], ys, "o-", label=label)
            else:
                ax.plot(xs, ys, "o-" if plot["kind"] == "lines" else ".", label=label)
        if plot["kind"] == "ratio":
            ax.axhline(1.0, color="k", lw=0.8)
        ax.set_title(plot["title"])
        ax.set_xlabel(plot["xlabel"])
        ax.set_ylabel(plot["ylabel"])
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def run(ref: str, out: str | None = None, seed: int | None = None, jobs: int = 1) -> tuple[int, dict]:
    """Run one scenario; returns ``(exit_code, report)`` and writes artifacts under ``out``."""
    scen = load_scenario(ref)
    seed = scen.get("seed", 0) if seed is None else seed
    out_dir = Path(out or os.environ.get(OUT_ENV, "scaleflow-out")) / scen["name"]
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    results = {}
    for check in scen["checks"]:
        t0 = time.perf_counter()
        try:
            res = CHECKS[check](scen.get(check, {}), seed, jobs)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"[{check}] bad configuration: {exc}") from exc
        res["seconds"] = time.perf_counter() - t0
        results[check] = res
    elapsed = time.perf_counter() - started
    report = {
        "schema": SCHEMA,
        "scenario": scen["name"],
        "seed": seed,
        "checks": {k: {"passed": v["passed"], "metrics": v["metrics"]} for k, v in results.items()},
        "passed": all(v["passed"] for v in results.values()),
    }
    report = _clean(report)
    (out_dir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    meta = {
        "schema": SCHEMA,
        "scenario": scen["name"],
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seconds": {k: v["seconds"] for k, v in results.items()},
        "total_seconds": elapsed,
        "budget_seconds": scen.get("budget_seconds"),
        "python": platform.python_version(),
    }
    (out_dir / "meta.json").write_text(json.dumps(_clean(meta), sort_keys=True, indent=2) + "\n")
    for check, res in results.items():
        if res.get("rows"):
            (out_dir / f"{check}.csv").write_text(_csv(res["rows"]))
        if res.get("plot"):
            _svg(res["plot"], out_dir / f"{check}.svg")
    return (0 if report["passed"] else 1), report
