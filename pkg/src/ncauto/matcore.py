"""Dense complex matrix primitives and the algebra of nc-points.

An nc-point at level ``n`` is a d-tuple of ``n x n`` complex matrices.  It is
stored as a read-only ``(d, n, n)`` complex128 array.  Plain matrices are
ordinary numpy arrays validated with :func:`ncauto.validation.check_matrix`.
"""

from typing import Callable, NamedTuple, Optional

import numpy as np

from .validation import DimensionMismatchError, check_matrix, check_positive_int

#: Reciprocal condition number below which a similarity is refused.
RCOND_FLOOR = 1e-12
#: Eigenvalues of a nominally PSD matrix in ``[-EIG_CLAMP, 0]`` are treated as 0.
EIG_CLAMP = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class DomainExitError(ValueError):
    """A probe point left the declared domain."""


class NcPoint:
    """A d-tuple of ``n x n`` complex matrices (a point of level ``n``).

    >>> x = NcPoint([[[1.0]], [[2.0]]])
    >>> x.level, x.d
    (1, 2)
    """

    __slots__ = ("_vars",)

    def __init__(self, vars):
        arr = np.array(vars, dtype=np.complex128)
        if arr.ndim != 3:
            raise DimensionMismatchError(f"NcPoint needs a (d, n, n) array, got shape {arr.shape}")
        d, n, m = arr.shape
        if d < 1 or n < 1 or n != m:
            raise DimensionMismatchError(f"NcPoint matrices must be square and d >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("NcPoint entries must be finite")
        arr.flags.writeable = False
        self._vars = arr

    @classmethod
    def zeros(cls, d, level):
        return cls(np.zeros((d, level, level), dtype=np.complex128))

    @classmethod
    def from_scalars(cls, values):
        return cls(np.asarray(values, dtype=np.complex128).reshape(-1, 1, 1))

    @property
    def vars(self):
        return self._vars

    @property
    def level(self):
        return self._vars.shape[1]

    @property
    def d(self):
        return self._vars.shape[0]

    def __getitem__(self, j):
        return self._vars[j]

    def __len__(self):
        return self.d

    def __iter__(self):
        return iter(self._vars)

    def _other_vars(self, other):
        if not isinstance(other, NcPoint):
            return NotImplemented
        if other._vars.shape != self._vars.shape:
            raise DimensionMismatchError(
                f"cannot combine points of shape {self._vars.shape} and {other._vars.shape}"
            )
        return other._vars

    def __add__(self, other):
        ov = self._other_vars(other)
        if ov is NotImplemented:
            return ov
        return NcPoint(self._vars + ov)

    def __sub__(self, other):
        ov = self._other_vars(other)
        if ov is NotImplemented:
            return ov
        return NcPoint(self._vars - ov)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return NcPoint(self._vars * c)

    __rmul__ = __mul__

    def __neg__(self):
        return NcPoint(-self._vars)

    def __eq__(self, other):
        if not isinstance(other, NcPoint):
            return NotImplemented
        return self._vars.shape == other._vars.shape and bool(np.array_equal(self._vars, other._vars))

    __hash__ = None

    def __repr__(self):
        return f"NcPoint(d={self.d}, level={self.level})"

    def to_json(self):
        return {"level": self.level, "vars": [encode_matrix(v) for v in self._vars]}

    @classmethod
    def from_json(cls, obj):
        pt = cls([decode_matrix(v) for v in obj["vars"]])
        if "level" in obj and obj["level"] != pt.level:
            raise DimensionMismatchError(f"declared level {obj['level']} but matrices are {pt.level}x{pt.level}")
        return pt


class BlockShape(NamedTuple):
    p: int
    q: int

    @property
    def d(self):
        return self.p * self.q


# -- JSON codecs: complex numbers as [re, im], matrices as nested row-major lists

def encode_complex(z):
    z = complex(z)
    return [z.real, z.imag]


def decode_complex(obj):
    if isinstance(obj, (int, float)):
        return complex(obj)
    re, im = obj
    return complex(re, im)


def encode_matrix(M):
    M = np.asarray(M, dtype=np.complex128)
    return [[encode_complex(z) for z in row] for row in M]


def decode_matrix(obj):
    return check_matrix([[decode_complex(z) for z in row] for row in obj])


# -- nc-point algebra

def direct_sum(x, y):
    """Block-diagonal sum ``x (+) y``, variable by variable."""
    if x.d != y.d:
        raise DimensionMismatchError(f"direct sum of points with d={x.d} and d={y.d}")
    n, m = x.level, y.level
    out = np.zeros((x.d, n + m, n + m), dtype=np.complex128)
    out[:, :n, :n] = x.vars
    out[:, n:, n:] = y.vars
    return NcPoint(out)


def _broadcast_solve(s, B):
    return np.linalg.solve(np.broadcast_to(s, B.shape), B)


def check_invertible(s, floor=RCOND_FLOOR, name="similarity"):
    s = check_matrix(s, name=name, square=True)
    rcond = 1.0 / np.linalg.cond(s)
    if not rcond >= floor:
        raise SingularMatrixError(f"{name} has reciprocal condition {rcond:.3g} below floor {floor:g}")
    return s


def conjugate(s, x, floor=RCOND_FLOOR):
    """Return ``s^{-1} x s`` applied to every variable of ``x``."""
    s = check_invertible(s, floor)
    if s.shape[0] != x.level:
        raise DimensionMismatchError(f"similarity of size {s.shape[0]} on a level-{x.level} point")
    return NcPoint(_broadcast_solve(s, x.vars @ s))


def gamma_pack(x, shape):
    """Pack ``d = p*q`` matrices into one ``(n p) x (n q)`` block matrix, row-major over variables."""
    p, q = shape
    if x.d != p * q:
        raise DimensionMismatchError(f"cannot pack {x.d} variables into a {p}x{q} block")
    n = x.level
    return x.vars.reshape(p, q, n, n).transpose(0, 2, 1, 3).reshape(p * n, q * n)


def gamma_unpack(M, shape, level):
    """Exact inverse of :func:`gamma_pack`."""
    p, q = shape
    n = check_positive_int(level, "level")
    M = check_matrix(M)
    if M.shape != (p * n, q * n):
        raise DimensionMismatchError(f"expected a {p * n}x{q * n} matrix for a {p}x{q} block at level {n}, got {M.shape}")
    return NcPoint(M.reshape(p, n, q, n).transpose(0, 2, 1, 3).reshape(p * q, n, n))


def amplify(A, n):
    """The constant ``id_n (x) A`` in the packed layout (outer index = block)."""
    return np.kron(A, np.eye(n))


def operator_norm(M):
    """Largest singular value."""
    M = np.asarray(M, dtype=np.complex128)
    return float(np.linalg.svd(M, compute_uv=False)[0])


def frobenius(M):
    return float(np.linalg.norm(np.asarray(M).ravel()))


def herm_sqrt_inv(M, power):
    """Hermitian square root (``power=0.5``) or inverse square root (``power=-0.5``).

    Eigenvalues in ``[-1e-12, 0]`` are clamped to zero; anything lower, or a
    zero eigenvalue with ``power=-0.5``, raises ``NotPositiveDefiniteError``.
    """
    if power not in (0.5, -0.5):
        raise ValueError(f"power must be +0.5 or -0.5, got {power!r}")
    M = check_matrix(M, square=True)
    scale = 1.0 + operator_norm(M)
    if frobenius(M - M.conj().T) > 1e-10 * scale:
        raise NotPositiveDefiniteError("matrix is not Hermitian")
    w, V = np.linalg.eigh((M + M.conj().T) / 2)
    if w[0] < -EIG_CLAMP:
        raise NotPositiveDefiniteError(f"minimum eigenvalue {w[0]:.3g} is negative")
    w = np.clip(w, 0.0, None)
    if power < 0:
        if w[0] <= 0.0:
            raise NotPositiveDefiniteError("matrix is singular; no inverse square root")
        f = 1.0 / np.sqrt(w)
    else:
        f = np.sqrt(w)
    return (V * f) @ V.conj().T


class Derivative(NamedTuple):
    value: NcPoint
    error: float


def directional_derivative(
    f: Callable[[NcPoint], NcPoint],
    z: NcPoint,
    h: NcPoint,
    step: Optional[float] = None,
    domain=None,
) -> Derivative:
    """Estimate ``Df(z)[h]`` by central differences with one Richardson step.

    ``step`` defaults to ``1e-5 * (1 + max_j ||z^j||)``.  The error estimate is
    the distance between the extrapolated value and the finer central
    difference.  When ``domain`` (a DomainSpec) is given every probe point is
    checked for membership first.
    """
    if z.vars.shape != h.vars.shape:
        raise DimensionMismatchError("base point and direction must have the same shape")
    if step is None:
        step = 1e-5 * (1.0 + max(operator_norm(v) for v in z.vars))

    def central(t):
        plus, minus = z + t * h, z - t * h
        if domain is not None:
            for pt in (plus, minus):
                if not domain.contains(pt):
                    raise DomainExitError(f"probe point at step {t:g} left the domain")
        return (f(plus).vars - f(minus).vars) / (2 * t)

    coarse = central(step)
    fine = central(step / 2)
    value = (4 * fine - coarse) / 3
    return Derivative(NcPoint(value), frobenius(value - fine))


# -- randomness

def trial_rng(seed, *key):
    """Generator for one trial, derived from ``(seed, key)`` independently of run order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def ginibre(rng, *shape):
    """Complex Gaussian matrix with entries of variance ``1/n`` (n = last dimension)."""
    n = shape[-1]
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * n)


def random_unitary(rng, n):
    """Haar-distributed unitary via QR with the phase correction."""
    q, r = np.linalg.qr(ginibre(rng, n, n))
    ph = np.diag(r).copy()
    ph[ph == 0] = 1.0
    return q * (ph / np.abs(ph))


def random_contraction(rng, p, q, norm):
    """A random ``p x q`` matrix with operator norm exactly ``norm``."""
    G = ginibre(rng, p, q)
    return G * (norm / operator_norm(G))


def random_similarity(rng, n, eps=0.1):
    """``I + eps * G`` with Ginibre ``G``."""
    return np.eye(n) + eps * ginibre(rng, n, n)


def relative_residual(lhs, rhs):
    """``||L - R||_F / (1 + ||L||_F + ||R||_F)``."""
    lhs = np.asarray(lhs.vars if isinstance(lhs, NcPoint) else lhs)
    rhs = np.asarray(rhs.vars if isinstance(rhs, NcPoint) else rhs)
    return frobenius(lhs - rhs) / (1.0 + frobenius(lhs) + frobenius(rhs))


def matrix_units(n):
    """Yield ``(i, j, E_ij)`` for the standard matrix units of ``M_n``."""
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n), dtype=np.complex128)
            E[i, j] = 1.0
            yield i, j, E


def hat(Z, j, d):
    """The d-tuple with ``Z`` in slot ``j`` and zeros elsewhere."""
    out = np.zeros((d,) + Z.shape, dtype=np.complex128)
    out[j] = Z
    return NcPoint(out)

