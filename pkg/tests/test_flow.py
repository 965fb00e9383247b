import numpy as np
import pytest

from scaleflow.flow import (
    FlowBlowUpError,
    FlowConfig,
    Trajectory,
    action_profile,
    closed_form_linear_flow,
    closed_form_trajectory,
    energy_identity_check,
    gradient_check,
    integrate,
    residual,
)
from scaleflow.frames import (
    UnsupportedFieldError,
    bump_hamiltonian,
    delay_field,
    floer_field,
    linear_field,
    loglog_slope,
    quadratic_hamiltonian,
    quartic_hamiltonian,
    squeezed_structure,
)
from scaleflow.loop_space import LAGRANGIAN, FourierPath


def rel_error(w, j, gamma, tau):
    ex = closed_form_linear_flow(j, gamma, tau, [1.0], w.s)
    return float(np.abs(w.states[:, w.N + j] - ex).max() / np.abs(ex).max())


@pytest.mark.parametrize("j,gamma,tau", [(0, 1.0, 0.0), (1, 1.0, 0.5), (-1, 0.7, 0.5), (2, 1.0, 0.25)])
def test_etdrk4_matches_closed_form(j, gamma, tau):
    spec = delay_field(1, [(tau, gamma)])
    w = integrate(spec, FourierPath.single_mode(j, [1.0], 4), 1.0, FlowConfig(ds=2.0**-8))
    assert rel_error(w, j, gamma, tau) <= 1e-8


def test_etdrk4_order_with_fundamental_linear_part():
    spec = delay_field(1, [(0.5, 1.0)])
    x0 = FourierPath.single_mode(1, [1.0], 4)
    ds = [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7]
    errs = [rel_error(integrate(spec, x0, 1.0, FlowConfig(ds=h, linear_part="fundamental", samples=17)), 1, 1.0, 0.5) for h in ds]
    assert loglog_slope(ds, errs) >= 3.8


def test_adaptive_integrator_matches_closed_form():
    spec = delay_field(1, [(0.5, 1.0)])
    w = integrate(spec, FourierPath.single_mode(1, [1.0], 3), 0.5, FlowConfig(integrator="adaptive", samples=33))
    assert rel_error(w, 1, 1.0, 0.5) <= 1e-8


def test_nonlinear_flow_agrees_between_integrators():
    spec = floer_field(bump_hamiltonian(1, 1.0, amplitude=0.5))
    c = np.zeros((9, 1), complex)
    c[3:6, 0] = [0.02, 0.05, 0.03j]
    x0 = FourierPath(c)
    a = integrate(spec, x0, 0.25, FlowConfig(ds=2.0**-10, samples=33))
    b = integrate(spec, x0, 0.25, FlowConfig(integrator="adaptive", samples=33))
    assert np.abs(a.states - b.states).max() <= 1e-9


def test_integrated_trajectory_has_small_residual():
    spec = floer_field(bump_hamiltonian(1, 1.0, amplitude=0.5))
    x0 = FourierPath.single_mode(1, [0.08], 4)
    w = integrate(spec, x0, 0.25, FlowConfig(ds=2**-10, samples=513))
    assert residual(spec, w) <= 1e-6


def test_energy_identity_closed_form():
    spec = floer_field(quadratic_hamiltonian(1, 1.0))
    w = closed_form_trajectory(spec, FourierPath.single_mode(0, [1.0], 4), 1.0, 513)
    w = w.with_states(w.states, policy="field")
    exact = 0.5 * (np.exp(2.0) - np.exp(-2.0))
    rep = energy_identity_check(spec, w)
    assert rep["action_drop"] == pytest.approx(exact, rel=1e-8)
    assert rep["energy"] == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("H", [bump_hamiltonian(1, 1.0, amplitude=0.5), quartic_hamiltonian(1)], ids=["bump", "quartic"])
def test_energy_identity_on_integrated_flow(H):
    spec = floer_field(H)
    c = np.zeros((9, 1), complex)
    c[3:6, 0] = [0.03, 0.06, -0.02j]
    w = integrate(spec, FourierPath(c), 0.25, FlowConfig(ds=2**-10, samples=257))
    rep = energy_identity_check(spec, w)
    assert rep["passed"] and rep["mismatch"] <= 1e-6
    assert rep["max_action_increase"] == 0.0
    assert np.all(np.diff(action_profile(spec, w)) <= 0)


@pytest.mark.parametrize(
    "H",
    [quadratic_hamiltonian(1, 1.0), bump_hamiltonian(1, 1.0, modulation=0.3), bump_hamiltonian(2, 0.5, amplitude=0.3, radius=1.5)],
    ids=["quadratic", "bump", "bump-2"],
)
def test_gradient_check(H):
    spec = floer_field(H)
    rng = np.random.default_rng(0)
    N, n = 6, H.n
    c = 0.3 * (rng.normal(size=(2 * N + 1, n)) + 1j * rng.normal(size=(2 * N + 1, n)))
    c /= (1.0 + np.abs(np.arange(-N, N + 1)))[:, None] ** 2
    dirs = [FourierPath(0.1 * (rng.normal(size=c.shape) + 1j * rng.normal(size=c.shape))) for _ in range(3)]
    rep = gradient_check(spec, FourierPath(c), dirs)
    assert rep["passed"]
    assert max(d["agreement"] for d in rep["directions"]) <= 1e-6


def test_gradient_check_needs_standard_floer_field():
    spec = floer_field(quadratic_hamiltonian(1, 1.0), squeezed_structure(1, 0.3))
    with pytest.raises(UnsupportedFieldError):
        gradient_check(spec, FourierPath.zeros(1, 3), [FourierPath.zeros(1, 3)])


def test_blow_up_is_reported():
    spec = linear_field(1, 1.0)
    with pytest.raises(FlowBlowUpError) as info:
        integrate(spec, FourierPath.single_mode(3, [1.0], 4), 2.0, FlowConfig(ds=2**-6))
    assert info.value.norm > info.value.ceiling


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(integrator="euler")
    with pytest.raises(ValueError):
        FlowConfig(linear_part="half")
    with pytest.raises(ValueError):
        integrate(linear_field(1, 1.0), FourierPath.zeros(1, 2), 0.5, FlowConfig(samples=16))


def test_delay_flow_rejects_lagrangian_start():
    x0 = FourierPath(np.ones((3, 1)), LAGRANGIAN)
    with pytest.raises(UnsupportedFieldError):
        integrate(delay_field(1, [(0.5, 1.0)]), x0, 0.5)


def test_trajectory_jsonl_roundtrip():
    spec = linear_field(1, 1.0)
    w = closed_form_trajectory(spec, FourierPath.single_mode(1, [0.5j], 2), 0.5, 9)
    back = Trajectory.from_jsonl(w.to_jsonl())
    assert np.array_equal(back.states, w.states)
    assert (back.T, back.policy, back.spec) == (w.T, w.policy, w.spec)


def test_malformed_stream_raises():
    with pytest.raises(ValueError):
        Trajectory.from_jsonl('{"type": "header", "S": 3}\n')
