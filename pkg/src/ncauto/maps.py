"""Evaluators for the automorphism families and related nc maps.

Every map is an immutable expression object with ``apply(x)`` acting on an
:class:`~ncauto.matcore.NcPoint` at any level, an ``inverse()`` where a closed
form exists, and a JSON encoding tagged by ``"variant"``.

Packed constants follow the layout of :func:`~ncauto.matcore.gamma_pack`: the
outer block index carries the p-by-q structure, so ``id_n (x) A`` is
``np.kron(A, I_n)``.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .matcore import (
    NcPoint,
    RCOND_FLOOR,
    SingularMatrixError,
    amplify,
    check_invertible,
    decode_complex,
    decode_matrix,
    encode_complex,
    encode_matrix,
    gamma_pack,
    gamma_unpack,
    herm_sqrt_inv,
    operator_norm,
)
from .validation import DimensionMismatchError, check_matrix

UNITARY_TOL = 1e-10


class NotInvertibleError(ValueError):
    pass


class DomainViolationError(ValueError):
    """The argument lies outside the set where the formula is defined."""


def _right_solve(X, M):
    """``X @ inv(M)`` with the condition floor enforced on ``M``."""
    M = check_invertible(M, RCOND_FLOOR, name="middle factor")
    return np.linalg.solve(M.T, X.T).T


# -- scalar-coefficient formulas

def mobius_apply(theta, a, Z):
    """``e^{i theta} (Z - a I)(I - conj(a) Z)^{-1}``."""
    a = complex(a)
    if not abs(a) < 1:
        raise ValueError(f"Mobius parameter must satisfy |a| < 1, got {a}")
    Z = check_matrix(Z, square=True)
    eye = np.eye(Z.shape[0])
    return np.exp(1j * theta) * _right_solve(Z - a * eye, eye - np.conj(a) * Z)


def mobius_inverse_params(theta, a):
    """Parameters of ``m^{-1}`` in the same normal form: ``(-theta, -e^{i theta} a)``."""
    return -theta, -np.exp(1j * theta) * complex(a)


def polydisk_auto_apply(perm, mobius, x):
    """Apply ``m_j`` to ``x^j`` and place the result in slot ``perm[j]``."""
    if len(perm) != x.d or len(mobius) != x.d:
        raise DimensionMismatchError(f"polydisk map on {len(perm)} variables applied to d={x.d}")
    worst = max(operator_norm(v) for v in x.vars)
    if not worst < 1.0:
        raise DomainViolationError(f"point is outside the matrix polydisk (max norm {worst:.6g})")
    out = np.empty_like(x.vars)
    for j, (theta, a) in enumerate(mobius):
        out[perm[j]] = mobius_apply(theta, a, x[j])
    return NcPoint(out)


def _check_unitary(U, name):
    U = check_matrix(U, name=name, square=True)
    if np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])) > UNITARY_TOL:
        raise ValueError(f"{name} is not unitary within {UNITARY_TOL:g}")
    return U


def linear_isometry_apply(U, V, shape, x):
    """``Z -> (id (x) U) Z (id (x) V)`` on the packed point."""
    p, q = shape
    n = x.level
    Z = gamma_pack(x, shape)
    return gamma_unpack(amplify(U, n) @ Z @ amplify(V, n), shape, n)


def transpose_amplify(p, X):
    """Block transpose of a p-by-p grid of square blocks; the blocks themselves are kept."""
    X = check_matrix(X, square=True)
    N = X.shape[0]
    if N % p:
        raise DimensionMismatchError(f"a {N}x{N} matrix is not a {p}x{p} grid of square blocks")
    n = N // p
    return X.reshape(p, n, p, n).transpose(2, 1, 0, 3).reshape(N, N)


def ha_apply(A, shape, Z):
    """The rectangular Mobius map ``H_A`` on a packed ``(n p) x (n q)`` point."""
    p, q = shape
    A = check_matrix(A)
    Z = check_matrix(Z)
    if A.shape != (p, q):
        raise DimensionMismatchError(f"A must be {p}x{q}, got {A.shape}")
    if Z.shape[0] % p or Z.shape[1] % q or Z.shape[0] // p != Z.shape[1] // q:
        raise DimensionMismatchError(f"packed point of shape {Z.shape} does not fit a {p}x{q} block")
    n = Z.shape[0] // p
    left = herm_sqrt_inv(amplify(np.eye(p) - A @ A.conj().T, n), -0.5)
    right = herm_sqrt_inv(amplify(np.eye(q) - A.conj().T @ A, n), 0.5)
    middle = np.eye(n * q) + amplify(A.conj().T, n) @ Z
    return left @ _right_solve(Z + amplify(A, n), middle) @ right


def counterexample_apply(h, x):
    """``(x, y, z) -> (x, y, z + h(xy - yx))`` with polynomial ``h`` (ascending coefficients)."""
    if x.d != 3:
        raise DimensionMismatchError(f"the commutator map needs 3 variables, got {x.d}")
    comm = x[0] @ x[1] - x[1] @ x[0]
    acc = np.zeros_like(comm)
    eye = np.eye(x.level)
    for c in reversed(h):
        acc = acc @ comm + c * eye
    return NcPoint([x[0], x[1], x[2] + acc])


# -- expression types

class NcMap:
    """Base class; subclasses implement ``apply``, ``inverse`` and ``to_json``."""

    d = None

    def __call__(self, x):
        return self.apply(x)

    def _check_arity(self, x):
        if self.d is not None and x.d != self.d:
            raise DimensionMismatchError(f"{type(self).__name__} expects {self.d} variables, got {x.d}")

    def inverse(self):
        raise NotInvertibleError(f"{type(self).__name__} has no closed-form inverse")


@dataclass(frozen=True, eq=False)
class Identity(NcMap):
    d: int

    def apply(self, x):
        self._check_arity(x)
        return x

    def inverse(self):
        return self

    def to_json(self):
        return {"variant": "Identity", "d": self.d}


@dataclass(frozen=True, eq=False)
class MobiusTuple(NcMap):
    """Polydisk automorphism: Mobius maps ``(theta_j, a_j)`` then the slot permutation."""

    thetas: Tuple[float, ...]
    points: Tuple[complex, ...]
    perm: Tuple[int, ...] = None

    def __post_init__(self):
        thetas = tuple(float(t) for t in self.thetas)
        points = tuple(complex(a) for a in self.points)
        perm = tuple(range(len(thetas))) if self.perm is None else tuple(int(i) for i in self.perm)
        if len(points) != len(thetas) or len(perm) != len(thetas) or not thetas:
            raise ValueError("MobiusTuple needs matching, non-empty theta, a and permutation lists")
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        if any(not abs(a) < 1 for a in points):
            raise ValueError("every Mobius parameter needs |a| < 1")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "perm", perm)

    @property
    def d(self):
        return len(self.thetas)

    def apply(self, x):
        self._check_arity(x)
        return polydisk_auto_apply(self.perm, list(zip(self.thetas, self.points)), x)

    def inverse(self):
        inv_perm = [0] * self.d
        for j, k in enumerate(self.perm):
            inv_perm[k] = j
        params = [mobius_inverse_params(self.thetas[inv_perm[k]], self.points[inv_perm[k]]) for k in range(self.d)]
        return MobiusTuple([t for t, _ in params], [a for _, a in params], inv_perm)

    def to_json(self):
        return {
            "variant": "MobiusTuple",
            "theta": list(self.thetas),
            "a": [encode_complex(a) for a in self.points],
            "sigma": list(self.perm),
        }


@dataclass(frozen=True, eq=False)
class LinearIsometry(NcMap):
    """Morita isometry ``x -> U x V`` extended as ``(id (x) U) Z (id (x) V)``."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _check_unitary(self.U, "U"))
        object.__setattr__(self, "V", _check_unitary(self.V, "V"))

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    @property
    def d(self):
        return self.U.shape[0] * self.V.shape[0]

    def apply(self, x):
        self._check_arity(x)
        return linear_isometry_apply(self.U, self.V, self.shape, x)

    def inverse(self):
        return LinearIsometry(self.U.conj().T, self.V.conj().T)

    def to_json(self):
        return {"variant": "LinearIsometry", "U": encode_matrix(self.U), "V": encode_matrix(self.V)}


@dataclass(frozen=True, eq=False)
class TransposeAmplification(NcMap):
    """One-variable block transpose on a p-by-p grid; deliberately *not* an nc map for p >= 2."""

    p: int
    d = 1

    def apply(self, x):
        self._check_arity(x)
        return NcPoint([transpose_amplify(self.p, x[0])])

    def inverse(self):
        return self

    def to_json(self):
        return {"variant": "TransposeAmplification", "p": self.p}


@dataclass(frozen=True, eq=False)
class HA(NcMap):
    A: np.ndarray

    def __post_init__(self):
        A = check_matrix(self.A, name="A")
        if not operator_norm(A) < 1.0:
            raise ValueError(f"H_A needs ||A|| < 1, got {operator_norm(A):.6g}")
        object.__setattr__(self, "A", A)

    @property
    def shape(self):
        return self.A.shape

    @property
    def d(self):
        return self.A.shape[0] * self.A.shape[1]

    def apply(self, x):
        self._check_arity(x)
        return gamma_unpack(ha_apply(self.A, self.shape, gamma_pack(x, self.shape)), self.shape, x.level)

    def inverse(self):
        return HA(-self.A)

    def origin_image(self):
        """``H_A(0)`` at level 1: ``(I - AA*)^{-1/2} A (I - A*A)^{1/2}``."""
        return ha_apply(self.A, self.shape, np.zeros(self.shape))

    def to_json(self):
        return {"variant": "HA", "A": encode_matrix(self.A)}


@dataclass(frozen=True, eq=False)
class CounterexampleMap(NcMap):
    """``(x, y, z) -> (x, y, z + h(xy - yx))``; ``h`` given by ascending coefficients."""

    h: Tuple[complex, ...] = (0.0, 1.0)
    d = 3

    def __post_init__(self):
        h = tuple(complex(c) for c in self.h)
        while len(h) > 1 and h[-1] == 0:
            h = h[:-1]
        if not h or h[0] != 0:
            raise ValueError("h must vanish at 0")
        if len(h) < 2:
            raise ValueError("h must be non-constant")
        object.__setattr__(self, "h", h)

    def apply(self, x):
        self._check_arity(x)
        return counterexample_apply(self.h, x)

    def inverse(self):
        # The first two slots are untouched, so subtracting h undoes the shift.
        return CounterexampleMap(tuple(-c for c in self.h))

    def to_json(self):
        return {"variant": "CounterexampleMap", "h": [encode_complex(c) for c in self.h]}


@dataclass(frozen=True, eq=False)
class Compose(NcMap):
    """``maps[0] o maps[1] o ... o maps[-1]``; the last map is applied first."""

    maps: Tuple[NcMap, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("Compose needs at least one map")
        for outer, inner in zip(maps, maps[1:]):
            if outer.d is not None and inner.d is not None and outer.d != inner.d:
                raise DimensionMismatchError(
                    f"cannot compose {type(outer).__name__} (d={outer.d}) after {type(inner).__name__} (d={inner.d})"
                )
        object.__setattr__(self, "maps", maps)

    @property
    def d(self):
        return next((m.d for m in reversed(self.maps) if m.d is not None), None)

    def apply(self, x):
        for m in reversed(self.maps):
            x = m.apply(x)
        return x

    def inverse(self):
        return Compose(tuple(m.inverse() for m in reversed(self.maps)))

    def to_json(self):
        return {"variant": "Compose", "maps": [m.to_json() for m in self.maps]}


def apply(expr, x):
    return expr.apply(x)


def invert(expr):
    return expr.inverse()


def map_from_json(obj):
    variant = obj.get("variant")
    if variant == "Identity":
        return Identity(int(obj["d"]))
    if variant == "MobiusTuple":
        return MobiusTuple(obj["theta"], [decode_complex(a) for a in obj["a"]], obj.get("sigma"))
    if variant == "LinearIsometry":
        return LinearIsometry(decode_matrix(obj["U"]), decode_matrix(obj["V"]))
    if variant == "TransposeAmplification":
        return TransposeAmplification(int(obj["p"]))
    if variant == "HA":
        return HA(decode_matrix(obj["A"]))
    if variant == "CounterexampleMap":
        return CounterexampleMap(tuple(decode_complex(c) for c in obj["h"]))
    if variant == "Compose":
        return Compose(tuple(map_from_json(m) for m in obj["maps"]))
    raise ValueError(f"unknown map variant {variant!r}")


def map_to_json(expr):
    return expr.to_json()


__all__ = [
    "NcMap", "Identity", "MobiusTuple", "LinearIsometry", "TransposeAmplification", "HA",
    "CounterexampleMap", "Compose", "apply", "invert", "mobius_apply", "polydisk_auto_apply",
    "linear_isometry_apply", "transpose_amplify", "ha_apply", "counterexample_apply",
    "map_from_json", "map_to_json", "NotInvertibleError", "DomainViolationError",
    "SingularMatrixError",
]
