"""Trajectory families with known structure, used by the ledger, tail and extraction runs."""

from __future__ import annotations

import numpy as np

from .flow import FlowConfig, Trajectory, closed_form_trajectory, integrate
from .frames import bump_hamiltonian, floer_field, linear_field
from .loop_space import FourierPath


def perturbed_quadratic_family(count=32, N=4, T=0.25, S=513, n=1, seed=0, amplitude=0.5, radius=1.0,
                               initial=(0.02, 0.1), spec=None):
    """Single-mode data ``a e^{2 pi i j t} v`` with ``j in {-1, 0, 1}`` under a radial bump.

    Radial Hamiltonians keep single-mode loops single-mode, so the Galerkin flow is exact
    up to rounding.  Initial sizes stay small enough that ``|w|`` remains well inside
    the bump radius on ``[-T, T]``, where the bump is far from its non-analytic edge.
    """
    rng = np.random.default_rng(seed)
    if spec is None:
        spec = floer_field(bump_hamiltonian(n, 1.0, amplitude=amplitude, radius=radius))
    cfg = FlowConfig(ds=2 * T / (S - 1), samples=S)
    out = []
    for _ in range(count):
        j = int(rng.integers(-1, 2))
        a = rng.uniform(*initial)
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        x0 = FourierPath.single_mode(j, a * v / np.linalg.norm(v), N)
        out.append(integrate(spec, x0, T, cfg))
    return spec, out


def _unit(spec, c, T, S):
    from .compactness import trajectory_metric

    w = closed_form_trajectory(spec, FourierPath(c), T, S)
    return c / trajectory_metric(w, w.with_states(0 * w.states), T)


def shrinking_family(count=32, N=4, T=0.5, S=257, n=1, gamma=1.0):
    """``w_nu = (1 + 1/nu) w*`` for an exact linear flow line ``w*`` of unit metric size.

    Every member lies within distance 1 of every other, so ``tol = 1`` groups them all.
    """
    spec = linear_field(n, gamma)
    a = np.zeros((2 * N + 1, n), complex)
    a[N, 0], a[N + 1, 0] = 0.3, 0.1j
    a = _unit(spec, a, T, S)
    fam = [closed_form_trajectory(spec, FourierPath(a * (1 + 1 / nu)), T, S) for nu in range(1, count + 1)]
    return spec, fam, closed_form_trajectory(spec, FourierPath(a), T, S)


def two_cluster_family(count=32, N=4, T=0.5, S=257, n=1, gamma=1.0):
    """Odd members ``(1 + 1/nu) w_a``, even members ``(1 + 1/nu) w_b``.

    ``w_a`` and ``w_b`` have unit metric size and disjoint Fourier support, so members of
    different parity are more than 1 apart and members of equal parity less than 1.
    """
    spec = linear_field(n, gamma)
    a = np.zeros((2 * N + 1, n), complex)
    b = np.zeros((2 * N + 1, n), complex)
    a[N, 0], a[N + 1, 0] = 0.3, 0.1j
    b[N - 1, 0] = -0.4 + 0.2j
    a, b = _unit(spec, a, T, S), _unit(spec, b, T, S)
    fam = [
        closed_form_trajectory(spec, FourierPath((a if nu % 2 else b) * (1 + 1 / nu)), T, S)
        for nu in range(1, count + 1)
    ]
    return spec, fam


def synthetic_decay_family(count=16, K=512, T=0.1, S=257, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Scale coordinates ``profile_m(s) / (f(nu) nu)`` for ``f(nu) = nu``; returns ``(family, weights)``."""
    rng = np.random.default_rng(seed)
    nu = np.arange(1, K + 1, dtype=float)
    s = np.linspace(-T, T, S)
    fam = []
    for _ in range(count):
        om, ph = rng.uniform(0.5, 3.0), rng.uniform(0.0, 2 * np.pi)
        fam.append(np.cos(om * s + ph)[:, None] / (nu * nu)[None, :])
    return np.array(fam), nu


def critical_trajectory(N=4, T=0.5, S=257, n=1) -> Trajectory:
    """The zero loop, a critical point of every catalog field with ``X(0) = 0``."""
    return Trajectory(T, np.zeros((S, 2 * N + 1, n), complex), policy="fd")
