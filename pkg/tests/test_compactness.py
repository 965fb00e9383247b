import csv
import io
import json

import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from scaleflow import compactness as cp
from scaleflow.families import (
    critical_trajectory,
    perturbed_quadratic_family,
    shrinking_family,
    synthetic_decay_family,
    two_cluster_family,
)
from scaleflow.flow import FlowConfig, closed_form_trajectory, integrate
from scaleflow.frames import (
    UnsupportedFieldError,
    bump_hamiltonian,
    floer_field,
    linear_field,
    quadratic_hamiltonian,
    scalar_rotation_frame,
    squeezed_structure,
    trivial_frame,
)
from scaleflow.loop_space import FourierPath


def decaying_mode(a, T=0.5, S=513):
    """``w(s) = a e^{-s}`` on mode 0 for the linear field with gamma = 1."""
    spec = linear_field(1, 1.0)
    return spec, closed_form_trajectory(spec, FourierPath.single_mode(0, [a], 4), T, S)


# bump, cutoff, mollifier


def test_bump_has_unit_mass():
    s = np.linspace(-1, 1, 200001)
    assert trapezoid(cp.bump(s), s) == pytest.approx(1.0, abs=1e-10)
    assert cp.bump(1.0) == 0.0 and cp.bump(-1.5) == 0.0


def test_smooth_step_endpoints_and_symmetry():
    assert cp.smooth_step(0.0) == pytest.approx(0.0, abs=1e-15)
    assert cp.smooth_step(1.0) == pytest.approx(1.0, abs=1e-12)
    u = np.linspace(0, 1, 11)
    assert np.allclose(cp.smooth_step(u) + cp.smooth_step(1 - u), 1.0, atol=1e-12)


def test_cutoff_plateau_and_support():
    spec = cp.cutoff(0.25, 0.5)
    s = np.linspace(-0.5, 0.5, 1001)
    b = spec.beta(s)
    assert np.all(b[np.abs(s) <= 0.25] == pytest.approx(1.0, abs=1e-12))
    assert np.all(b[np.abs(s) >= 0.5 - spec.eps] == pytest.approx(0.0, abs=1e-15))
    assert np.all((b >= -1e-15) & (b <= 1 + 1e-12))


def test_cutoff_derivative_constants():
    spec = cp.cutoff(0.25, 0.5)
    s = np.linspace(-0.5, 0.5, 400001)
    db = spec.dbeta(s)
    mid = np.abs(s) < 0.49
    fd = np.gradient(spec.beta(s), s)
    assert np.abs(db - fd)[mid].max() < 1e-4 * np.abs(db).max()
    assert np.abs(db).max() == pytest.approx(spec.dbeta_sup, rel=1e-6)
    assert np.sqrt(trapezoid(db**2, s)) == pytest.approx(spec.dbeta_l2, rel=1e-8)


@pytest.mark.parametrize("Tp,T", [(0.0, 1.0), (1.0, 1.0), (0.6, 0.5)])
def test_cutoff_rejects_bad_windows(Tp, T):
    with pytest.raises(ValueError):
        cp.cutoff(Tp, T)


def test_mollify_reproduces_constants_and_lines():
    spec = cp.cutoff(0.25, 0.5)
    s = np.linspace(-0.5, 0.5, 1025)
    delta = 0.05
    inner = np.abs(s) <= 0.25 - delta
    assert np.allclose(cp.mollify(np.ones_like(s), s, delta, spec)[inner], 1.0, atol=1e-14)
    assert np.allclose(cp.mollify(s, s, delta, spec)[inner], s[inner], atol=1e-14)


def test_mollify_support_and_young():
    spec = cp.cutoff(0.25, 0.5)
    s = np.linspace(-0.5, 0.5, 1025)
    delta = 0.05
    u = np.random.default_rng(0).normal(size=(s.size, 3))
    out = cp.mollify(u, s, delta, spec)
    assert np.all(out[np.abs(s) > 0.5 - spec.eps + delta] == 0.0)
    bu = spec.beta(s)[:, None] * u
    assert np.sum(out**2) <= np.sum(bu**2) * (1 + 1e-12)


def test_mollify_rejects_wide_or_unresolved_kernels():
    spec = cp.cutoff(0.25, 0.5)
    s = np.linspace(-0.5, 0.5, 129)
    with pytest.raises(ValueError):
        cp.mollify(s, s, 0.2, spec)
    with pytest.raises(ValueError):
        cp.mollify(s, s, 0.01, spec)


# xi and the ledgers


def test_xi_with_trivial_frame_is_the_field():
    spec, w = decaying_mode(0.3)
    xi = cp.xi_compute(trivial_frame(1), spec, w)
    assert np.allclose(xi, -w.states, atol=1e-15)


def test_critical_point_has_zero_xi_and_passing_ledgers():
    spec = floer_field(bump_hamiltonian(1, 1.0))
    w = critical_trajectory()
    assert np.all(cp.xi_compute(scalar_rotation_frame(1), spec, w) == 0)
    boot = cp.bootstrap_ledger(trivial_frame(1), spec, w, 0.25, 1.0, 5.0)
    elem = cp.elementary_ledger(spec, w, 0.25, 3.0)
    assert boot.passed and elem.passed
    assert all(v == 0.0 for v in elem.measured.values())


def test_elementary_ledger_single_mode_closed_form():
    a, T, Tp = 0.3, 0.5, 0.25
    spec, w = decaying_mode(a, T)
    led = cp.elementary_ledger(spec, w, Tp, 3.0)
    full, inner = a * np.sqrt(np.sinh(2 * T)), a * np.sqrt(np.sinh(2 * Tp))
    expected = {
        "w_L2_H1": 0.5 * full,
        "w_W12_H0": np.sqrt(2) * full,
        "dxi_L2_H0": inner,
        "xi_L2_H1": 0.5 * inner,
        "w_W22_H0": np.sqrt(3) * inner,
        "w_W12_H1": np.sqrt(0.5) * inner,
        "w_L2_H2": 0.25 * inner,
    }
    for key, val in expected.items():
        assert led.measured[key] == pytest.approx(val, rel=1e-5), key
    assert led.constants["kappa"] == pytest.approx(full, rel=1e-6)
    assert led.bounds["w_L2_H1"] == pytest.approx(3.0 * (full + 1.0), rel=1e-6)
    assert led.passed


def test_bootstrap_ledger_single_mode_closed_form():
    a, T, Tp = 0.3, 0.5, 0.25
    spec, w = decaying_mode(a, T)
    led = cp.bootstrap_ledger(trivial_frame(1), spec, w, Tp, 1.0, 3.0)
    assert led.measured["w_C0_H1"] == pytest.approx(0.5 * a * np.exp(T), rel=1e-12)
    assert led.measured["w_C1_H0"] == pytest.approx(a * np.exp(T), rel=1e-12)
    assert led.measured["xi_C0_H0"] == pytest.approx(a * np.exp(T), rel=1e-12)
    assert led.measured["w_L2_H2"] == pytest.approx(0.25 * a * np.sqrt(np.sinh(2 * Tp)), rel=1e-5)
    kappa = a * np.exp(T)
    assert led.constants["kappa"] == pytest.approx(kappa, rel=1e-12)
    assert led.bounds["xi_C0_H0"] == pytest.approx(kappa, rel=1e-12)
    assert led.passed


def test_ledgers_on_family():
    spec, fam = perturbed_quadratic_family(count=4)
    for w in fam:
        assert cp.bootstrap_ledger(trivial_frame(1), spec, w, 0.125, 1.0, 40.0).passed
        assert cp.elementary_ledger(spec, w, 0.125, spec.c + 2).passed


def test_elementary_ledger_rejects_nonstandard_structure():
    spec = floer_field(quadratic_hamiltonian(1, 1.0), squeezed_structure(1, 0.3))
    _, w = decaying_mode(0.1)
    with pytest.raises(UnsupportedFieldError):
        cp.elementary_ledger(spec, w, 0.25, 3.0)
    with pytest.raises(UnsupportedFieldError):
        cp.elementary_xi_defect(spec, w)


def test_window_must_be_on_grid():
    _, w = decaying_mode(0.1, S=9)
    with pytest.raises(ValueError):
        cp.window(w, 0.3)
    assert cp.window(w, 0.25) == slice(2, 7)


def test_ledger_serialization():
    spec, w = decaying_mode(0.3)
    led = cp.elementary_ledger(spec, w, 0.25, 3.0)
    d = json.loads(led.to_json())
    assert d["passed"] is True and d["kind"] == "elementary"
    rows = list(csv.DictReader(io.StringIO(led.to_csv())))
    assert [r["quantity"] for r in rows] == sorted(led.bounds)


# identity defects


def test_elementary_defect_on_exact_flow():
    spec, w = decaying_mode(0.3)
    rep = cp.elementary_xi_defect(spec, w)
    assert rep["passed"] and rep["defect"] < 1e-6


def test_rotation_frame_defects_converge_at_second_order():
    spec = floer_field(bump_hamiltonian(1, 1.0, amplitude=0.5))
    frame = scalar_rotation_frame(1, 1.0)
    x0 = FourierPath.single_mode(1, [0.08], 4)
    traj = {S: integrate(spec, x0, 0.25, FlowConfig(ds=0.5 / (S - 1), samples=S)) for S in (513, 1025)}
    for fn in (cp.xi_equation_defect, cp.second_derivative_defect):
        coarse, fine = fn(frame, spec, traj[513]), fn(frame, spec, traj[1025])
        assert coarse["passed"]
        assert cp.refinement_ratio(coarse, fine) >= 8


# tails


def test_tail_threshold_formula():
    # f(nu) = nu, N = 8, c = 1, T = 0.1, p = 2: 2 max(9^(-1/4), 9^(-1/2) 0.1^(-1/2))
    eps = cp.tail_threshold(1.0, 0.1, 2, lambda nu: nu, 8)
    assert eps == pytest.approx(2 * max(9**-0.25, 9**-0.5 * 0.1**-0.5), rel=1e-15)
    assert cp.tail_threshold(1.0, 0.1, 2, lambda nu: nu, 64) < eps / 2


@pytest.mark.parametrize("p", [1.0, 0.5])
def test_tail_threshold_needs_p_above_one(p):
    with pytest.raises(ValueError):
        cp.tail_threshold(1.0, 1.0, p, lambda nu: nu, 4)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 10), st.floats(1.1, 6), st.integers(0, 200), st.integers(1, 50))
def test_tail_threshold_decreases_in_N(c, T, p, N, step):
    f = lambda nu: nu**1.5
    assert cp.tail_threshold(c, T, p, f, N + step) <= cp.tail_threshold(c, T, p, f, N)


def test_single_mode_family_has_no_tails():
    s = np.linspace(-0.1, 0.1, 65)
    fam = np.zeros((3, s.size, 32))
    fam[:, :, 0] = np.cos(s)[None] * np.array([1.0, 2.0, 3.0])[:, None]
    rep = cp.tail_verify(fam, np.arange(1, 33, dtype=float), 0.1, [4, 8, 16])
    assert rep["passed"] and all(r["max_tail"] == 0.0 for r in rep["ladder"])


def test_synthetic_family_tails_below_threshold():
    fam, f = synthetic_decay_family()
    rep = cp.tail_verify(fam, f, 0.1, [8, 16, 32, 64])
    assert rep["passed"] and rep["eps_decreasing"]


# metric and extraction


def test_metric_zero_and_symmetric():
    _, fam, _ = shrinking_family(count=3)
    assert cp.trajectory_metric(fam[0], fam[0], 0.25) == 0.0
    assert cp.trajectory_metric(fam[0], fam[2], 0.25) == cp.trajectory_metric(fam[2], fam[0], 0.25)


def test_metric_closed_form_amplitude():
    # the H_0 derivative dominates: sup |a - b| e^{-s} over [-T', T']
    (_, w), (_, v) = decaying_mode(0.3), decaying_mode(0.1)
    assert cp.trajectory_metric(w, v, 0.25) == pytest.approx(0.2 * np.exp(0.25), rel=1e-5)


def test_metric_triangle_inequality():
    _, fam = two_cluster_family(count=6)
    D = [[cp.trajectory_metric(a, b, 0.25) for b in fam] for a in fam]
    for i in range(6):
        for j in range(6):
            for k in range(6):
                assert D[i][k] <= D[i][j] + D[j][k] + 1e-14


def test_metric_rejects_mismatched_grids():
    (_, w), (_, v) = decaying_mode(0.3, S=513), decaying_mode(0.3, S=257)
    with pytest.raises(ValueError):
        cp.trajectory_metric(w, v, 0.25)


def test_extract_constant_family():
    spec, fam, base = shrinking_family(count=1)
    idx, limit, rep = cp.extract_convergent([base] * 5, [0.25, 0.5], 1.0, spec=spec)
    assert idx == [0, 1, 2, 3, 4] and rep["passed"] and all(g == 0.0 for g in rep["gaps"])


def test_extract_shrinking_family():
    spec, fam, target = shrinking_family()
    idx, limit, rep = cp.extract_convergent(fam, [0.25, 0.5], 1.0, spec=spec)
    assert idx == list(range(32))
    assert rep["passed"] and rep["limit_residual"] <= 1e-6
    final = cp.trajectory_metric(limit, target, 0.5)
    assert final < cp.trajectory_metric(fam[0], target, 0.5)


def test_extract_two_cluster_family():
    spec, fam = two_cluster_family()
    idx, _, rep = cp.extract_convergent(fam, [0.25, 0.5], 1.0, spec=spec)
    assert idx in (list(range(0, 32, 2)), list(range(1, 32, 2)))
    assert rep["passed"] and rep["gaps_decreasing"]


def test_extract_is_inconclusive_on_scattered_family():
    spec, fam = two_cluster_family(count=4)
    idx, limit, rep = cp.extract_convergent(fam, [0.25], 1e-3, spec=spec)
    assert limit is None and rep["inconclusive"] and not rep["passed"]


def test_extract_rejects_repeated_windows():
    spec, fam, _ = shrinking_family(count=3)
    with pytest.raises(ValueError):
        cp.extract_convergent(fam, [0.25, 0.25], 1.0, spec=spec)
