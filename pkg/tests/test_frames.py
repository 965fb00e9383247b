import numpy as np
import pytest

from scaleflow.frames import (
    AlmostComplexStructure,
    AxiomConfig,
    FrameValidationError,
    UnsupportedFieldError,
    axiom_suite,
    build_frame_from_J,
    bump_hamiltonian,
    check_growth_condition,
    complex_unit,
    conjugated_remainder,
    constant_conjugated_structure,
    constant_rotation_frame,
    delay_field,
    elementary_constant,
    field_from_descriptor,
    floer_field,
    frame_apply,
    frame_differential,
    frame_from_descriptor,
    frame_inverse_apply,
    linear_field,
    loglog_slope,
    quadratic_hamiltonian,
    quartic_hamiltonian,
    scalar_rotation_frame,
    squeezed_structure,
    trivial_frame,
    v3_constant,
    vf_diff,
    vf_eval,
)
from scaleflow.loop_space import LAGRANGIAN, FourierPath, sobolev_norm


def smooth_loop(rng, N, n, scale=0.3, modes=3):
    c = np.zeros((2 * N + 1, n), complex)
    m = min(modes, N)
    block = rng.normal(size=(2 * m + 1, n)) + 1j * rng.normal(size=(2 * m + 1, n))
    c[N - m : N + m + 1] = scale * block / (1.0 + np.abs(np.arange(-m, m + 1)))[:, None] ** 2
    return FourierPath(c)


STRUCTURES = [constant_conjugated_structure(1), squeezed_structure(1, 0.3), squeezed_structure(2, 0.2)]


@pytest.mark.parametrize("J", STRUCTURES, ids=lambda J: f"{J.name}-{J.n}")
def test_structures_are_compatible(J):
    pts = np.random.default_rng(0).uniform(-2, 2, size=(64, 2 * J.n))
    rep = J.check(pts)
    assert rep["square_residual"] < 1e-12 and rep["asymmetry"] < 1e-12 and rep["min_metric_eig"] > 0


@pytest.mark.parametrize("J", STRUCTURES, ids=lambda J: f"{J.name}-{J.n}")
def test_built_frame_intertwines(J):
    frame = build_frame_from_J(J)
    pts = np.random.default_rng(1).uniform(-2, 2, size=(64, 2 * J.n))
    rep = frame.check(pts)
    assert rep["intertwining_residual"] < 1e-12 and rep["inverse_residual"] < 1e-12


def test_frame_derivative_matches_finite_difference():
    frame = build_frame_from_J(squeezed_structure(1, 0.3))
    rng = np.random.default_rng(2)
    p, h = rng.normal(size=2), rng.normal(size=2)
    e = 1e-6
    fd = (frame(p + e * h) - frame(p - e * h)) / (2 * e)
    assert np.allclose(frame.dpsi(p, h), fd, atol=1e-8)


def test_incompatible_structure_is_rejected():
    I = complex_unit(1)
    bad = AlmostComplexStructure(1, lambda p: np.broadcast_to(-I, p.shape[:-1] + I.shape), lambda p, h: 0 * I)
    with pytest.raises(FrameValidationError):
        build_frame_from_J(bad)


def test_standard_structure_gives_trivial_frame():
    assert build_frame_from_J(linear_field(1, 1.0).structure).identity


def test_frame_roundtrip_on_loops():
    rng = np.random.default_rng(3)
    frame = scalar_rotation_frame(1, 1.0)
    x, v = smooth_loop(rng, 8, 1), smooth_loop(rng, 8, 1, 1.0)
    back = frame_inverse_apply(frame, x, frame_apply(frame, x, v, N_out=32), N_out=8)
    assert sobolev_norm(back - v, 1) <= 1e-8 * sobolev_norm(v, 1)


def test_constant_rotation_is_multiplication_by_unit():
    rng = np.random.default_rng(4)
    x, v = smooth_loop(rng, 5, 1), smooth_loop(rng, 5, 1)
    out = frame_apply(constant_rotation_frame(1, 0.7), x, v)
    assert np.allclose(out.coeffs, np.exp(0.7j) * v.coeffs, atol=1e-13)


@pytest.mark.parametrize(
    "frame", [scalar_rotation_frame(1, 1.0), build_frame_from_J(squeezed_structure(1, 0.3))], ids=["rotation", "squeezed"]
)
def test_frame_differential_slope(frame):
    rng = np.random.default_rng(5)
    x, h, v = smooth_loop(rng, 8, 1), smooth_loop(rng, 8, 1), smooth_loop(rng, 8, 1)
    base, lin = frame_apply(frame, x, v), frame_differential(frame, x, h, v)
    eps = [1e-1, 3e-2, 1e-2, 3e-3]
    errs = [sobolev_norm(frame_apply(frame, x + e * h, v) - base - e * lin, 1) for e in eps]
    assert loglog_slope(eps, errs) >= 1.9


@pytest.mark.parametrize(
    "spec",
    [
        floer_field(bump_hamiltonian(1, 1.0, modulation=0.3)),
        floer_field(quartic_hamiltonian(1)),
        floer_field(quadratic_hamiltonian(1, 1.0), squeezed_structure(1, 0.3)),
    ],
    ids=["bump", "quartic", "squeezed"],
)
def test_vf_diff_slope(spec):
    rng = np.random.default_rng(6)
    x, h = smooth_loop(rng, 8, 1), smooth_loop(rng, 8, 1)
    base, lin = vf_eval(spec, x), vf_diff(spec, x, h)
    eps = [1e-1, 3e-2, 1e-2, 3e-3]
    errs = [sobolev_norm(vf_eval(spec, x + e * h) - base - e * lin, 0) for e in eps]
    assert loglog_slope(eps, errs) >= 1.9


def test_linear_field_is_diagonal():
    # V(x) = -i dx/dt - gamma x on a single mode e^{2 pi i j t}
    for j in (-2, 0, 3):
        x = FourierPath.single_mode(j, [0.4 - 0.1j], 4)
        out = vf_eval(linear_field(1, 0.7), x)
        assert np.allclose(out.coeffs, (2 * np.pi * j - 0.7) * x.coeffs, atol=1e-13)


def test_delay_field_multiplier():
    j, tau, g = 1, 0.25, 0.8
    x = FourierPath.single_mode(j, [1.0], 3)
    out = vf_eval(delay_field(1, [(tau, g)]), x)
    assert np.allclose(out.mode(j), 2 * np.pi * j - g * np.exp(-2j * np.pi * j * tau), atol=1e-13)


def test_delay_field_rejects_lagrangian_paths():
    x = FourierPath(np.ones((3, 1)), LAGRANGIAN)
    with pytest.raises(UnsupportedFieldError):
        vf_eval(delay_field(1, [(0.5, 1.0)]), x)


def test_delay_times_must_lie_in_unit_interval():
    with pytest.raises(UnsupportedFieldError):
        delay_field(1, [(1.0, 1.0)])


def test_remainder_of_linear_field_is_constant():
    # Phi = 1, DV = -i d/dt - gamma and F = -i d/dt + 1/2
    rng = np.random.default_rng(7)
    x, xh = smooth_loop(rng, 6, 1), smooth_loop(rng, 6, 1)
    spec = linear_field(1, 1.3)
    for path in ("explicit", "definition"):
        P = conjugated_remainder(spec, trivial_frame(1), x, xh, path)
        assert np.allclose(P.coeffs, (-1.3 - 0.5) * xh.coeffs, atol=1e-13)


def test_remainder_paths_agree_for_nonstandard_structure():
    J = squeezed_structure(1, 0.3)
    spec = floer_field(bump_hamiltonian(1, 1.0, modulation=0.3), J)
    rng = np.random.default_rng(8)
    x, xh = smooth_loop(rng, 16, 1, 0.1), smooth_loop(rng, 16, 1, 1.0)
    frame = build_frame_from_J(J)
    a = conjugated_remainder(spec, frame, x, xh, "explicit")
    b = conjugated_remainder(spec, frame, x, xh, "definition")
    assert sobolev_norm(a - b, 1) <= 1e-9 * sobolev_norm(a, 1)


@pytest.mark.parametrize(
    "H",
    [quadratic_hamiltonian(1, 1.0), bump_hamiltonian(1, 1.0, modulation=0.3), bump_hamiltonian(2, 0.5, amplitude=0.3, radius=1.5)],
    ids=["quadratic", "bump", "bump-2"],
)
def test_declared_growth_constant_holds(H):
    assert check_growth_condition(H)["passed"]


def test_elementary_constant_closed_form():
    assert elementary_constant(1.0, 0.0) == 2.0
    assert elementary_constant(1.0, 1.0) == 3.0
    assert elementary_constant(0.5, 1.0) == pytest.approx(4.0)
    spec = linear_field(1, 1.0)
    assert elementary_constant(spec.gamma, spec.c) == 3.0


def test_v3_constant_chain():
    d = v3_constant(2.0, 1.0, 0.5)
    assert d["d2"] == pytest.approx(1.0 + 0.75 + 4.0)
    assert d["p_bound"] == pytest.approx(2.0)
    assert d["c1"] == pytest.approx(max(1.0, d["p_bound"], d["d2"]))


def test_axioms_trivial_frame():
    rep = axiom_suite(trivial_frame(1), linear_field(1, 1.0), AxiomConfig(c1_prime=3.0))
    assert rep["passed"]
    assert rep["c0"] == pytest.approx(1.0, abs=1e-10)
    assert rep["checks"]["v3_prime"]["passed"]


def test_axioms_rotation_frame_ladder_stable():
    spec = floer_field(bump_hamiltonian(1, 1.0))
    rep = axiom_suite(scalar_rotation_frame(1, 1.0), spec, AxiomConfig(ladder=(8, 16, 32)))
    assert rep["passed"]
    assert rep["checks"]["c0"]["ratio"] <= 1.5


def test_v3_prime_needs_elementary_field():
    spec = floer_field(quadratic_hamiltonian(1, 1.0), squeezed_structure(1, 0.3))
    with pytest.raises(UnsupportedFieldError):
        axiom_suite(trivial_frame(1), spec, AxiomConfig(ladder=(8,), samples=2, c1_prime=3.0))


def test_catalog_descriptors_roundtrip():
    for spec in (linear_field(1, 1.0), delay_field(1, [(0.5, 1.0)]), floer_field(bump_hamiltonian(1, 1.0), squeezed_structure(1))):
        again = field_from_descriptor(spec.descriptor())
        assert again.descriptor() == spec.descriptor()
    for frame in (trivial_frame(1), scalar_rotation_frame(1, 0.5)):
        assert frame_from_descriptor(frame.descriptor()).descriptor() == frame.descriptor()
