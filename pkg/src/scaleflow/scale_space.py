"""Weighted sequence scales ``H_k = l^2_{f^k}`` and the diagonal fundamental operator.

A :class:`ScaleVector` stores canonical l^2 coordinates ``x_nu`` (``nu = 1, 2, ...``)
with finite support; every level norm is obtained by reweighting on the fly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class ScaleConfigError(ValueError):
    """Raised for inconsistent weights, signs or mismatched scale vectors."""


def floer_mode_order(count: int) -> np.ndarray:
    """Two-sided Fourier indices ordered by increasing ``|2 pi j + 1/2|``.

    The order is ``0, -1, 1, -2, 2, ...`` which makes the Floer weights monotone.
    """
    k = np.arange(count)
    # k=0 -> 0, k odd -> -(k+1)/2, k even>0 -> k/2
    return np.where(k % 2 == 1, -(k + 1) // 2, k // 2)


def floer_mode_position(j: np.ndarray | int) -> np.ndarray:
    """Inverse of :func:`floer_mode_order` (zero-based position of mode ``j``)."""
    j = np.asarray(j)
    return np.where(j < 0, -2 * j - 1, 2 * j)


@dataclass(frozen=True)
class WeightFunction:
    """Monotone increasing unbounded weight ``f: N -> (0, inf)``.

    Use the constructors :meth:`power`, :meth:`floer_periodic`,
    :meth:`floer_lagrangian` and :meth:`tabulated`.
    """

    kind: str
    params: tuple = ()
    table: tuple = field(default=(), compare=True)

    @classmethod
    def power(cls, exponent: float) -> "WeightFunction":
        if not exponent > 0:
            raise ScaleConfigError("power weight needs a positive exponent")
        return cls("power", (float(exponent),))

    @classmethod
    def floer_periodic(cls, n: int) -> "WeightFunction":
        if n < 1:
            raise ScaleConfigError("complex dimension must be >= 1")
        return cls("floer_periodic", (int(n),))

    @classmethod
    def floer_lagrangian(cls, n: int) -> "WeightFunction":
        if n < 1:
            raise ScaleConfigError("complex dimension must be >= 1")
        return cls("floer_lagrangian", (int(n),))

    @classmethod
    def tabulated(cls, values: Sequence[float], growth: float) -> "WeightFunction":
        """Table ``f(1..K)`` continued by ``f(K) (nu/K)**growth`` beyond ``K``.

        ``growth`` is the declared unboundedness witness; it must be positive and
        the table itself must be positive, monotone and not constant.
        """
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ScaleConfigError("tabulated weight needs a non-empty 1-d table")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ScaleConfigError("tabulated weights must be positive and finite")
        if np.any(np.diff(vals) < 0):
            raise ScaleConfigError("tabulated weights must be monotone increasing")
        if not growth > 0:
            raise ScaleConfigError("tabulated weight needs a positive growth witness")
        if vals.size > 1 and not vals[-1] > vals[0]:
            raise ScaleConfigError("tabulated weight does not grow over its table")
        return cls("tabulated", (float(growth),), tuple(float(v) for v in vals))

    def __call__(self, nu) -> np.ndarray:
        nu = np.asarray(nu)
        if np.any(nu < 1):
            raise ScaleConfigError("weight indices start at 1")
        nuf = nu.astype(float)
        if self.kind == "power":
            return nuf ** self.params[0]
        if self.kind == "floer_periodic":
            j = floer_mode_order_from_nu(nu, 2 * self.params[0])
            return (2.0 * np.pi * j + 0.5) ** 2
        if self.kind == "floer_lagrangian":
            j = floer_mode_order_from_nu(nu, self.params[0])
            return (np.pi * j + 0.5) ** 2
        if self.kind == "tabulated":
            tab = np.asarray(self.table)
            K = tab.size
            inside = np.minimum(nu, K) - 1
            out = tab[inside].astype(float)
            beyond = nu > K
            return np.where(beyond, tab[-1] * (nuf / K) ** self.params[0], out)
        raise ScaleConfigError(f"unknown weight kind {self.kind!r}")

    def values(self, size: int) -> np.ndarray:
        """``f(1), ..., f(size)`` as an array."""
        return self(np.arange(1, size + 1))

    def descriptor(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "exponent": self.params[0]}
        if self.kind in ("floer_periodic", "floer_lagrangian"):
            return {"kind": self.kind, "n": self.params[0]}
        return {"kind": "tabulated", "values": list(self.table), "growth": self.params[0]}

    @classmethod
    def from_descriptor(cls, d: Mapping) -> "WeightFunction":
        kind = d.get("kind")
        if kind == "power":
            return cls.power(d["exponent"])
        if kind == "floer_periodic":
            return cls.floer_periodic(d["n"])
        if kind == "floer_lagrangian":
            return cls.floer_lagrangian(d["n"])
        if kind == "tabulated":
            return cls.tabulated(d["values"], d["growth"])
        raise ScaleConfigError(f"unknown weight descriptor {d!r}")


def floer_mode_order_from_nu(nu: np.ndarray, block: int) -> np.ndarray:
    """Fourier mode carried by scale index ``nu`` when each mode owns ``block`` reals."""
    return floer_mode_order(int(np.max(nu, initial=1)))[(np.asarray(nu) - 1) // block]


@dataclass(frozen=True)
class SignMap:
    """A map ``zeta: N -> {+1, -1}``; entries beyond the table use ``default``."""

    table: tuple = ()
    default: int = 1
    rule: str = "table"
    block: int = 1

    def __post_init__(self):
        if self.default not in (1, -1) or any(v not in (1, -1) for v in self.table):
            raise ScaleConfigError("sign map values must be +1 or -1")

    @classmethod
    def constant(cls, sign: int = 1) -> "SignMap":
        return cls((), int(sign))

    @classmethod
    def from_values(cls, values: Sequence[int], default: int = 1) -> "SignMap":
        return cls(tuple(int(v) for v in values), int(default))

    @classmethod
    def floer(cls, block: int) -> "SignMap":
        """Sign of ``2 pi j + 1/2`` (resp. ``pi j + 1/2``) under the Floer mode order."""
        return cls((), 1, "floer", int(block))

    def __call__(self, nu) -> np.ndarray:
        nu = np.asarray(nu)
        if self.rule == "floer":
            j = floer_mode_order_from_nu(nu, self.block)
            return np.where(j < 0, -1, 1)
        tab = np.asarray(self.table, dtype=int)
        out = np.full(nu.shape, self.default, dtype=int)
        inside = nu <= tab.size
        if tab.size:
            out[inside] = tab[nu[inside] - 1]
        return out

    def values(self, size: int) -> np.ndarray:
        return self(np.arange(1, size + 1))


class ScaleVector:
    """Finitely supported real sequence interpreted in every level ``H_k``.

    ``coeffs[i]`` is the coordinate ``x_{i+1}``.
    """

    __slots__ = ("coeffs", "weight")

    def __init__(self, coeffs, weight: WeightFunction):
        c = np.array(coeffs, dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise ScaleConfigError("scale vector coefficients must be finite")
        c.setflags(write=False)
        self.coeffs = c
        self.weight = weight

    @classmethod
    def from_mapping(cls, entries: Mapping[int, float], weight: WeightFunction) -> "ScaleVector":
        if not entries:
            return cls(np.zeros(0), weight)
        if min(entries) < 1:
            raise ScaleConfigError("scale indices start at 1")
        c = np.zeros(max(entries))
        for nu, val in entries.items():
            c[nu - 1] = val
        return cls(c, weight)

    @classmethod
    def unit(cls, nu: int, weight: WeightFunction, value: float = 1.0) -> "ScaleVector":
        return cls.from_mapping({nu: value}, weight)

    def __len__(self):
        return self.coeffs.size

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.coeffs.size))
        out[: self.coeffs.size] = self.coeffs
        return out

    def _same_weight(self, other: "ScaleVector"):
        if self.weight != other.weight:
            raise ScaleConfigError("scale vectors live on different weight functions")

    def __add__(self, other: "ScaleVector") -> "ScaleVector":
        self._same_weight(other)
        size = max(len(self), len(other))
        return ScaleVector(self.padded(size) + other.padded(size), self.weight)

    def __sub__(self, other: "ScaleVector") -> "ScaleVector":
        self._same_weight(other)
        size = max(len(self), len(other))
        return ScaleVector(self.padded(size) - other.padded(size), self.weight)

    def __mul__(self, scalar: float) -> "ScaleVector":
        return ScaleVector(self.coeffs * float(scalar), self.weight)

    __rmul__ = __mul__

    def __repr__(self):
        nz = np.flatnonzero(self.coeffs)
        return f"ScaleVector(support={len(nz)}, weight={self.weight.kind})"

    def to_json(self) -> str:
        nz = np.flatnonzero(self.coeffs)
        return json.dumps(
            {
                "weight": self.weight.descriptor(),
                "coeffs": [[int(i + 1), float(self.coeffs[i])] for i in nz],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ScaleVector":
        d = json.loads(text)
        weight = WeightFunction.from_descriptor(d["weight"])
        nus = [int(nu) for nu, _ in d["coeffs"]]
        if nus != sorted(nus) or len(set(nus)) != len(nus):
            raise ScaleConfigError("serialized indices must be strictly ascending")
        return cls.from_mapping({int(nu): float(v) for nu, v in d["coeffs"]}, weight)


def level_norm(x: ScaleVector, k: float) -> float:
    """``sqrt(sum f(nu)**k x_nu**2)``."""
    if len(x) == 0:
        return 0.0
    f = x.weight.values(len(x))
    return float(np.sqrt(np.sum(f**k * x.coeffs**2)))


def level_inner(x: ScaleVector, y: ScaleVector, k: float) -> float:
    x._same_weight(y)
    size = min(len(x), len(y))
    if size == 0:
        return 0.0
    f = x.weight.values(size)
    return float(np.sum(f**k * x.coeffs[:size] * y.coeffs[:size]))


def fundamental_apply(zeta: SignMap, x: ScaleVector) -> ScaleVector:
    """``(F x)_nu = zeta(nu) sqrt(f(nu)) x_nu``; an isometry ``H_{k+1} -> H_k``."""
    size = len(x)
    if size == 0:
        return x
    mult = zeta.values(size) * np.sqrt(x.weight.values(size))
    return ScaleVector(mult * x.coeffs, x.weight)


def fundamental_invert(zeta: SignMap, y: ScaleVector) -> ScaleVector:
    size = len(y)
    if size == 0:
        return y
    mult = zeta.values(size) * np.sqrt(y.weight.values(size))
    return ScaleVector(y.coeffs / mult, y.weight)


def quadratic_action(zeta: SignMap, x: ScaleVector) -> float:
    """``1/2 sum zeta(nu) sqrt(f(nu)) x_nu**2``, whose Hessian is ``F``."""
    size = len(x)
    if size == 0:
        return 0.0
    mult = zeta.values(size) * np.sqrt(x.weight.values(size))
    return float(0.5 * np.sum(mult * x.coeffs**2))


def project(x: ScaleVector, N: int) -> ScaleVector:
    """Orthogonal projection onto the first ``N`` coordinates."""
    if N < 0:
        raise ScaleConfigError("projection rank must be >= 0")
    c = x.coeffs.copy()
    c[N:] = 0.0
    return ScaleVector(c, x.weight)


def tail_norm(x: ScaleVector, N: int, k: float) -> float:
    """``level_norm(x - project(x, N), k)``."""
    if N < 0:
        raise ScaleConfigError("projection rank must be >= 0")
    if len(x) <= N:
        return 0.0
    f = x.weight(np.arange(N + 1, len(x) + 1))
    return float(np.sqrt(np.sum(f**k * x.coeffs[N:] ** 2)))


def tail_factor(weight: WeightFunction, N: int) -> float:
    """``f(N+1)**(-1/2)``: the gain of one level on the orthogonal complement of ``V_N``."""
    return float(weight(N + 1)) ** -0.5


# Dense helpers used by the trajectory-level code: arrays whose last axis holds
# the coordinates x_1..x_K.


def dense_level_norm(coeffs: np.ndarray, weights: np.ndarray, k: float) -> np.ndarray:
    return np.sqrt(np.sum(weights**k * np.asarray(coeffs) ** 2, axis=-1))


def dense_tail_norm(coeffs: np.ndarray, weights: np.ndarray, N: int, k: float) -> np.ndarray:
    c = np.asarray(coeffs)[..., N:]
    return np.sqrt(np.sum(weights[N:] ** k * c**2, axis=-1))


__all__ = [
    "ScaleConfigError",
    "WeightFunction",
    "SignMap",
    "ScaleVector",
    "level_norm",
    "level_inner",
    "fundamental_apply",
    "fundamental_invert",
    "quadratic_action",
    "project",
    "tail_norm",
    "tail_factor",
    "floer_mode_order",
    "floer_mode_position",
    "dense_level_norm",
    "dense_tail_norm",
]
