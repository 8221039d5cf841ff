"""nc-domain descriptors, membership tests and random member sampling.

Four kinds are supported:

``MatrixPolydisk``  every variable a strict contraction, ``{"d": d}``
``RpqBall``         ``||gamma(x)|| < 1`` for the p-by-q packing, ``{"p": p, "q": q}``
``SpectralDisk``    ``x`` similar to a strict contraction through some ``s``
                    with ``||s|| ||s^-1|| <= r_n``, ``{"radii": [1, r_2, ...]}``
``CommutatorDomain``  ``||x1 x2 - x2 x1|| < 1``, three variables, unbounded

A domain can be restricted to the levels of a sub-semigroup of the positive
integers given by a finite generator list.
"""

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import schur

from .matcore import (
    NcPoint,
    direct_sum,
    encode_matrix,
    gamma_pack,
    gamma_unpack,
    ginibre,
    operator_norm,
    random_contraction,
    random_unitary,
    trial_rng,
)
from .validation import DimensionMismatchError, check_matrix

KINDS = ("MatrixPolydisk", "RpqBall", "SpectralDisk", "CommutatorDomain")

YES, NO, UNDETERMINED = "yes", "no", "undetermined"


class SamplerError(RuntimeError):
    """Could not produce a member point at the requested level."""


@lru_cache(maxsize=256)
def in_semigroup(n, generators):
    """Is ``n`` a non-negative integer combination (with at least one term) of ``generators``?"""
    if n < 1:
        return False
    reach = np.zeros(n + 1, dtype=bool)
    reach[0] = True
    for k in range(1, n + 1):
        reach[k] = any(g <= k and reach[k - g] for g in generators)
    return bool(reach[n])


@dataclass(frozen=True)
class MembershipVerdict:
    member: str
    certificate: Optional[object] = None
    margin: Optional[float] = None

    def __bool__(self):
        return self.member == YES


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    params: dict = field(default_factory=dict)
    levels: Optional[Tuple[int, ...]] = None  # None means every level

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {KINDS}")
        params = dict(self.params)
        if self.kind == "MatrixPolydisk":
            params["d"] = int(params.get("d", 1))
            if params["d"] < 1:
                raise ValueError("MatrixPolydisk needs d >= 1")
        elif self.kind == "RpqBall":
            params["p"], params["q"] = int(params["p"]), int(params["q"])
            if params["p"] < 1 or params["q"] < 1:
                raise ValueError("RpqBall needs p, q >= 1")
        elif self.kind == "SpectralDisk":
            radii = [float(r) for r in params.get("radii", [1.0])]
            if not radii or radii[0] != 1.0:
                raise ValueError("SpectralDisk radius sequence must start with r_1 = 1")
            if any(b < a for a, b in zip(radii, radii[1:])):
                raise ValueError("SpectralDisk radius sequence must be non-decreasing")
            params["radii"] = radii
        object.__setattr__(self, "params", params)
        if self.levels is not None:
            gens = tuple(sorted({int(g) for g in self.levels}))
            if not gens or gens[0] < 1:
                raise ValueError("level generators must be positive integers")
            object.__setattr__(self, "levels", gens)

    # -- constructors

    @classmethod
    def polydisk(cls, d):
        return cls("MatrixPolydisk", {"d": d})

    @classmethod
    def rpq_ball(cls, p, q):
        return cls("RpqBall", {"p": p, "q": q})

    @classmethod
    def spectral_disk(cls, radii=(1.0,)):
        return cls("SpectralDisk", {"radii": list(radii)})

    @classmethod
    def commutator(cls):
        return cls("CommutatorDomain", {})

    def restrict(self, generators):
        return DomainSpec(self.kind, self.params, tuple(generators))

    # -- descriptors

    @property
    def d(self):
        if self.kind == "MatrixPolydisk":
            return self.params["d"]
        if self.kind == "RpqBall":
            return self.params["p"] * self.params["q"]
        if self.kind == "SpectralDisk":
            return 1
        return 3

    @property
    def bounded(self):
        return self.kind != "CommutatorDomain"

    def bound(self, level):
        """The nc-bound ``M_n`` on ``max_j ||x^j||``, or None when unbounded."""
        if self.kind in ("MatrixPolydisk", "RpqBall"):
            return 1.0
        if self.kind == "SpectralDisk":
            return self.radius(level)
        return None

    def radius(self, level):
        radii = self.params["radii"]
        return radii[min(level, len(radii)) - 1]

    def has_level(self, n):
        return self.levels is None or in_semigroup(int(n), self.levels)

    def contains(self, x):
        return membership(self, x).member == YES

    # -- JSON

    def to_json(self):
        levels = "all" if self.levels is None else {"generators": list(self.levels)}
        return {"kind": self.kind, "params": dict(self.params), "levels": levels}

    @classmethod
    def from_json(cls, obj):
        levels = obj.get("levels", "all")
        if levels == "all":
            gens = None
        elif isinstance(levels, dict) and "generators" in levels:
            gens = tuple(levels["generators"])
        else:
            raise ValueError(f"levels must be 'all' or {{'generators': [...]}}, got {levels!r}")
        return cls(obj["kind"], dict(obj.get("params", {})), gens)


def _norm_verdict(value):
    member = YES if value < 1.0 else NO
    return MembershipVerdict(member, value, 1.0 - value)


def membership(spec, x):
    """Decide whether ``x`` lies in the domain described by ``spec``."""
    if x.d != spec.d:
        raise DimensionMismatchError(f"{spec.kind} expects {spec.d} variables, got {x.d}")
    if not spec.has_level(x.level):
        return MembershipVerdict(NO)
    if spec.kind == "MatrixPolydisk":
        return _norm_verdict(max(operator_norm(v) for v in x.vars))
    if spec.kind == "RpqBall":
        return _norm_verdict(operator_norm(gamma_pack(x, (spec.params["p"], spec.params["q"]))))
    if spec.kind == "CommutatorDomain":
        return _norm_verdict(operator_norm(x[0] @ x[1] - x[1] @ x[0]))
    return spectral_disk_search(x[0], spec.radius(x.level))


# -- spectral disk

def condition_number(s):
    sv = np.linalg.svd(s, compute_uv=False)
    return float(sv[0] / sv[-1])


def _clamp_condition(s, r):
    """Project ``s`` onto ``{cond <= r}`` by raising small singular values."""
    U, sv, Vh = np.linalg.svd(s)
    sv = sv / sv[0]
    sv = np.maximum(sv, 1.0 / r)
    return (U * sv) @ Vh


def _similar_norm(s, x):
    return operator_norm(np.linalg.solve(s, x @ s))


class _ScaledUnitary:
    """``s = W0 expm(iH) diag(exp(t))`` with ``t`` shifted to ``[0, log r]``."""

    def __init__(self, x, W0, log_r):
        self.x = x
        self.n = x.shape[0]
        self.W0 = W0
        self.log_r = log_r

    def project(self, params):
        t = params[: self.n]
        params[: self.n] = np.clip(t - t.min(), 0.0, self.log_r)
        return params

    def unitary(self, params):
        n = self.n
        raw = params[n:].reshape(n, n)
        upper = np.triu(raw, 1) + 1j * np.tril(raw, -1).T
        H = upper + upper.conj().T + np.diag(np.diag(raw))
        w, V = np.linalg.eigh(H)
        return self.W0 @ ((V * np.exp(1j * w)) @ V.conj().T)

    def similarity(self, params):
        return self.unitary(params) * np.exp(params[: self.n])

    def objective(self, params):
        t = params[: self.n]
        W = self.unitary(params)
        inner = W.conj().T @ self.x @ W
        return operator_norm(np.exp(-t)[:, None] * inner * np.exp(t)[None, :])


def _descend(x, s0, r, max_iter, target):
    """Projected coordinate descent on ``||s^-1 x s||`` starting from ``s0``."""
    n = x.shape[0]
    # For s0 = U diag(sv) Vh the trailing Vh does not change ||s^-1 x s||.
    U, sv, _ = np.linalg.svd(s0)
    log_r = float(np.log(r))
    model = _ScaledUnitary(x, U, log_r)
    params = model.project(np.concatenate([np.log(sv), np.zeros(n * n)]))
    best = model.objective(params)
    step = 0.25
    for _ in range(max_iter):
        if best < target or step < 1e-9:
            break
        improved = False
        for k in range(params.size):
            if k < n and log_r == 0.0:
                continue
            for sign in (1.0, -1.0):
                trial = params.copy()
                trial[k] += sign * step
                trial = model.project(trial)
                val = model.objective(trial)
                if val < best:
                    params, best, improved = trial, val, True
                    break
        if not improved:
            step /= 2
    return model.similarity(params), best


def spectral_disk_search(x, r, max_iter=200):
    """One-sided search for ``s`` with ``cond(s) <= r`` and ``||s^-1 x s|| < 1``.

    Returns ``yes`` with the similarity as certificate, ``no`` when the
    spectral radius is at least 1, and ``undetermined`` otherwise.
    """
    x = check_matrix(x, square=True)
    r = float(r)
    if r < 1.0:
        raise ValueError(f"condition budget must be >= 1, got {r}")
    n = x.shape[0]
    eigvals = np.linalg.eigvals(x)
    rho = float(np.max(np.abs(eigvals)))
    if rho >= 1.0:
        return MembershipVerdict(NO, None, 1.0 - rho)

    eye = np.eye(n, dtype=np.complex128)
    plain = operator_norm(x)
    if plain < 1.0:
        return MembershipVerdict(YES, eye, 1.0 - plain)

    budget = max(1.0, r * (1 - 1e-12))
    candidates = []
    _, V = np.linalg.eig(x)
    V = V / np.linalg.norm(V, axis=0)
    if np.isfinite(np.linalg.cond(V)) and np.linalg.cond(V) < 1e12:
        candidates.append(V if condition_number(V) <= budget else _clamp_condition(V, budget))
    if n > 1:
        # Schur form with geometric diagonal scaling damps the strict upper triangle.
        _, Q = schur(x, output="complex")
        delta = budget ** (-1.0 / (n - 1))
        candidates.append(Q * delta ** np.arange(n))

    scored = [(_similar_norm(s, x), i, s) for i, s in enumerate(candidates)]
    best_val, _, best_s = min(scored, key=lambda t: (t[0], t[1]))
    if best_val >= 1.0 and n > 1:
        s, val = _descend(x, best_s, budget, max_iter, target=1.0 - 1e-9)
        val = _similar_norm(s, x)
        if val < best_val and condition_number(s) <= r:
            best_val, best_s = val, s
    if best_val < 1.0 and condition_number(best_s) <= r:
        return MembershipVerdict(YES, best_s, 1.0 - best_val)
    return MembershipVerdict(UNDETERMINED, None, 1.0 - best_val)


def verify_certificate(x, s, r):
    """Recompute both defining inequalities from a similarity certificate."""
    return condition_number(s) <= r and _similar_norm(s, x) < 1.0


# -- sampling

def sample_member(spec, level, rng, fraction=0.8, max_tries=100):
    """Draw a random member at ``level``; Ginibre entries scaled into the interior."""
    if not spec.has_level(level):
        raise SamplerError(f"level {level} is excluded by the level filter {spec.levels}")
    n = level
    for _ in range(max_tries):
        radius = fraction * rng.uniform(0.2, 1.0)
        if spec.kind == "MatrixPolydisk":
            x = NcPoint([random_contraction(rng, n, n, fraction * rng.uniform(0.2, 1.0)) for _ in range(spec.d)])
        elif spec.kind == "RpqBall":
            p, q = spec.params["p"], spec.params["q"]
            x = gamma_unpack(random_contraction(rng, p * n, q * n, radius), (p, q), n)
        elif spec.kind == "CommutatorDomain":
            a, b, c = ginibre(rng, 3, n, n)
            comm = operator_norm(a @ b - b @ a)
            if comm > 0:
                scale = np.sqrt(radius / comm)
                a, b = a * scale, b * scale
            x = NcPoint([a, b, c])
        else:
            r = spec.radius(n)
            eig = radius * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
            W = random_unitary(rng, n)
            t = rng.uniform(0.0, np.log(r), n) if r > 1 else np.zeros(n)
            s = (W * np.exp(t)) @ random_unitary(rng, n)
            x = NcPoint([np.linalg.solve(s.T, (s * eig).T).T])  # s diag(eig) s^-1
        if spec.contains(x):
            return x
    raise SamplerError(f"no member of {spec.kind} found at level {level} after {max_tries} tries")


def nc_closure_check(spec, samples=100, seed=0x5EED, levels=(1, 2, 3), tolerance=0.0):
    """Check closure under direct sums and unitary conjugation on random members."""
    from .verify import CheckReport

    if spec.kind == "SpectralDisk":
        raise ValueError("closure checks need decidable membership; SpectralDisk can be undetermined")
    levels = [n for n in levels if spec.has_level(n)]
    if not levels:
        raise SamplerError("no admissible level to sample from")
    start = time.perf_counter()
    violations = []
    for k in range(samples):
        rng = trial_rng(seed, k)
        n1, n2 = (int(v) for v in rng.choice(levels, 2))
        x = sample_member(spec, n1, rng)
        y = sample_member(spec, n2, rng)
        u = random_unitary(rng, n1)
        xs = direct_sum(x, y)
        xu = NcPoint(u.conj().T @ x.vars @ u)
        for label, pt in (("direct_sum", xs), ("unitary", xu)):
            if not spec.contains(pt):
                violations.append({"trial": k, "violation": label, "x": x.to_json(), "y": y.to_json(),
                                   "u": encode_matrix(u)})
    return CheckReport(
        check_name="nc_closure",
        seed=seed,
        trials=samples,
        max_residual=float(len(violations)),
        tolerance=tolerance,
        passed=not violations,
        witnesses=violations,
        runtime_ms=1000 * (time.perf_counter() - start),
    )
