"""Numerical checks of the nc-function identities and (counter)examples.

Each ``check_*`` function is deterministic in ``(seed, trials, tolerance)``:
trial ``k`` draws its randomness from ``trial_rng(seed, k)`` so serial and
parallel runs agree.  Results come back as :class:`CheckReport`.

Residuals are relative, ``||L - R||_F / (1 + ||L||_F + ||R||_F)``, unless the
check says otherwise.  Range checks report ``max(||image|| - 1)`` so that a
negative tolerance demands a strictly positive margin.
"""

import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .domains import (
    NO,
    YES,
    DomainSpec,
    SamplerError,
    condition_number,
    membership,
    sample_member,
    spectral_disk_search,
    verify_certificate,
)
from .matcore import (
    NcPoint,
    amplify,
    conjugate,
    direct_sum,
    directional_derivative,
    encode_matrix,
    frobenius,
    gamma_pack,
    gamma_unpack,
    ginibre,
    hat,
    herm_sqrt_inv,
    matrix_units,
    operator_norm,
    random_contraction,
    random_similarity,
    random_unitary,
    relative_residual,
    trial_rng,
)
from .maps import HA, ha_apply, mobius_apply, transpose_amplify

DEFAULT_SEED = 0x5EED
ALGEBRAIC_TOL = 1e-9
DERIVATIVE_TOL = 1e-6
MARGIN_TOL = -1e-12
SIMILARITY_RETRIES = 50


class OriginNotInDomainError(ValueError):
    pass


@dataclass
class CheckReport:
    check_name: str
    seed: int
    trials: int
    max_residual: float
    tolerance: float
    passed: bool
    witnesses: List[dict] = field(default_factory=list)
    runtime_ms: float = 0.0
    expect_failure: bool = False

    def to_json(self):
        res = self.max_residual
        return {
            "check": self.check_name,
            "seed": int(self.seed),
            "trials": int(self.trials),
            "max_residual": float(res) if res is not None and np.isfinite(res) else None,
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "expect_failure": bool(self.expect_failure),
            "witnesses": self.witnesses,
            "runtime_ms": float(self.runtime_ms),
        }

    @classmethod
    def from_json(cls, obj):
        res = obj["max_residual"]
        return cls(
            check_name=obj["check"],
            seed=obj["seed"],
            trials=obj["trials"],
            max_residual=float("nan") if res is None else res,
            tolerance=obj["tolerance"],
            passed=obj["passed"],
            witnesses=obj.get("witnesses", []),
            runtime_ms=obj.get("runtime_ms", 0.0),
            expect_failure=obj.get("expect_failure", False),
        )


def _report(name, seed, trials, max_residual, tolerance, witnesses, start, expect_failure=False, ok=True):
    within = max_residual <= tolerance
    return CheckReport(
        check_name=name,
        seed=seed,
        trials=trials,
        max_residual=float(max_residual),
        tolerance=float(tolerance),
        passed=bool(ok and (within != expect_failure)),
        witnesses=witnesses,
        runtime_ms=1000 * (time.perf_counter() - start),
        expect_failure=expect_failure,
    )


def _levels(spec, levels):
    out = [int(n) for n in levels if spec.has_level(n)]
    if not out:
        raise SamplerError(f"none of the levels {list(levels)} is admissible for {spec.kind}")
    return out


def _similar_member(spec, x, rng):
    for _ in range(SIMILARITY_RETRIES):
        s = random_similarity(rng, x.level)
        xs = conjugate(s, x)
        if spec.contains(xs):
            return s, xs
    raise SamplerError(f"no similarity kept the level-{x.level} point inside {spec.kind}")


# -- nc axioms

def check_nc_axioms(expr, spec, trials=100, seed=DEFAULT_SEED, levels=(1, 2, 3, 4),
                    tolerance=ALGEBRAIC_TOL, expect_failure=False):
    """Gradedness, direct sums and similarity equivariance on random members."""
    start = time.perf_counter()
    levels = _levels(spec, levels)
    worst, witness = 0.0, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        n1, n2 = (int(v) for v in rng.choice(levels, 2))
        x = sample_member(spec, n1, rng)
        y = sample_member(spec, n2, rng)
        fx, fy = expr.apply(x), expr.apply(y)
        graded = fx.level == n1 and fy.level == n2
        r_sum = relative_residual(expr.apply(direct_sum(x, y)), direct_sum(fx, fy))
        s, xs = _similar_member(spec, x, rng)
        r_sim = relative_residual(expr.apply(xs), conjugate(s, fx))
        for prop, r in (("graded", 0.0 if graded else np.inf), ("direct_sum", r_sum), ("similarity", r_sim)):
            if r > worst or witness is None:
                worst = r
                witness = {"trial": k, "property": prop, "residual": float(min(r, 1e300)),
                           "x": x.to_json(), "y": y.to_json(), "s": encode_matrix(s)}
    return _report("nc_axioms", seed, trials, min(worst, 1e300), tolerance, [witness], start, expect_failure)


# -- kernel identity for H_A

def kernel_identity_sides(A, W, Z):
    """Both sides of ``I - H_A(W)^* H_A(Z) = (...)(I - W^* Z)(...)`` on packed points."""
    p, q = A.shape
    n = Z.shape[0] // p
    I = np.eye(n * q)
    hw = ha_apply(A, (p, q), W)
    hz = ha_apply(A, (p, q), Z)
    lhs = I - hw.conj().T @ hz
    outer = herm_sqrt_inv(amplify(np.eye(q) - A.conj().T @ A, n), 0.5)
    left_inv = np.linalg.inv(I + W.conj().T @ amplify(A, n))
    right_inv = np.linalg.inv(I + amplify(A.conj().T, n) @ Z)
    rhs = outer @ left_inv @ (I - W.conj().T @ Z) @ right_inv @ outer
    return lhs, rhs


def check_kernel_identity(A=None, shape=(2, 2), trials=100, seed=DEFAULT_SEED, levels=(1, 2, 4),
                          tolerance=1e-10):
    """Kernel factorisation for ``H_A``; random ``A`` per trial when ``A`` is None."""
    start = time.perf_counter()
    p, q = shape if A is None else np.shape(A)
    worst, witness, psd_fail = 0.0, None, []
    for k in range(trials):
        rng = trial_rng(seed, k)
        n = int(rng.choice(levels))
        a = random_contraction(rng, p, q, rng.uniform(0.0, 0.95)) if A is None else np.asarray(A, complex)
        W = random_contraction(rng, n * p, n * q, rng.uniform(0.0, 0.95))
        Z = random_contraction(rng, n * p, n * q, rng.uniform(0.0, 0.95))
        lhs, rhs = kernel_identity_sides(a, W, Z)
        r = relative_residual(lhs, rhs)
        hz = ha_apply(a, (p, q), Z)
        min_eig = float(np.linalg.eigvalsh(np.eye(n * q) - hz.conj().T @ hz)[0])
        if min_eig < -1e-10:
            psd_fail.append({"trial": k, "min_eigenvalue": min_eig})
        if witness is None or r > worst:
            worst = r
            witness = {"trial": k, "level": n, "residual": r, "A": encode_matrix(a)}
    return _report("kernel_identity", seed, trials, worst, tolerance, [witness] + psd_fail, start,
                   ok=not psd_fail)


# -- complete isometry failure of the transpose

def swap_witness(p, n):
    """``sum_{i,j<k} E_ij (x) E_ji`` in ``M_p(M_n)`` with ``k = min(p, n)``; a partial isometry."""
    k = min(p, n)
    X = np.zeros((p * n, p * n), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            Ep = np.zeros((p, p))
            En = np.zeros((n, n))
            Ep[i, j] = 1.0
            En[j, i] = 1.0
            X += np.kron(Ep, En)
    return X


def cb_transpose_bound(p, n, samples=1000, seed=DEFAULT_SEED):
    """Lower bounds on ``||id_n (x) transpose_p||`` from the swap witness and random samples."""
    X = swap_witness(p, n)
    witness = operator_norm(transpose_amplify(p, X)) / operator_norm(X)
    rng = trial_rng(seed, 0)
    best_random = 0.0
    for _ in range(samples):
        G = ginibre(rng, p * n, p * n)
        G = G / frobenius(G)
        best_random = max(best_random, operator_norm(transpose_amplify(p, G)) / operator_norm(G))
    return {"swap": witness, "random": best_random, "bound": max(witness, best_random)}


def check_cb_transpose(p, n=None, samples=1000, seed=DEFAULT_SEED, tolerance=ALGEBRAIC_TOL):
    """The amplified transpose has norm ``min(p, n)`` on the swap witness; 1 when p or n is 1."""
    start = time.perf_counter()
    n = p if n is None else n
    b = cb_transpose_bound(p, n, samples, seed)
    trivial = p == 1 or n == 1
    expected = 1.0 if trivial else float(min(p, n))
    residual = abs(b["swap"] - expected)
    if trivial:
        ok = abs(b["random"] - 1.0) <= tolerance
    else:
        ok = b["bound"] > 1.0 + 1e-6
    witnesses = [
        {"source": "swap", "p": p, "level": n, "amplified_norm": b["swap"], "expected": expected},
        {"source": "random", "samples": samples, "amplified_norm": b["random"]},
    ]
    return _report("cb_transpose", seed, samples, residual, tolerance, witnesses, start, ok=ok)


# -- rigidity

@dataclass
class RigidityVerdict:
    fixes_origin: bool
    origin_residual: float
    derivative_residual: float
    identity_residual_at_levels: Dict[int, float]
    base_level: int = 1
    hypothesis_tol: float = 1e-8
    bounded: bool = True

    @property
    def derivative_is_identity(self):
        return self.derivative_residual <= self.hypothesis_tol

    @property
    def hypotheses_hold(self):
        return self.fixes_origin and self.derivative_is_identity

    def max_identity_residual(self):
        return max(self.identity_residual_at_levels.values(), default=0.0)

    def is_identity(self, tol=1e-8):
        return self.max_identity_residual() <= tol

    def implication_holds(self, tol=1e-8):
        return (not self.hypotheses_hold) or self.is_identity(tol)

    def to_json(self):
        out = asdict(self)
        out["identity_residual_at_levels"] = {str(k): v for k, v in self.identity_residual_at_levels.items()}
        return out


def rigidity_probe(expr, spec, base_level=1, probe_levels=(2, 3, 4), samples=20, seed=DEFAULT_SEED,
                   points=(), hypothesis_tol=1e-8):
    """Measure the rigidity hypotheses at ``base_level`` and ``||Phi(x) - x||`` at the probe levels.

    The derivative at the origin is estimated along every matrix-unit direction
    in every variable slot.  ``points`` adds fixed probe points to the random
    members.
    """
    d, m = spec.d, base_level
    zero = NcPoint.zeros(d, m)
    if not spec.contains(zero):
        raise OriginNotInDomainError(f"0 is not in {spec.kind} at level {m}")
    origin_residual = max(operator_norm(v) for v in expr.apply(zero).vars)
    deriv = 0.0
    for j in range(d):
        for _, _, E in matrix_units(m):
            h = hat(E, j, d)
            D = directional_derivative(expr.apply, zero, h, domain=spec).value
            deriv = max(deriv, frobenius(D.vars - h.vars))
    residuals = {}
    for n in probe_levels:
        if not spec.has_level(n):
            continue
        pts = [pt for pt in points if pt.level == n]
        for k in range(samples):
            pts.append(sample_member(spec, n, trial_rng(seed, n, k)))
        if pts:
            residuals[n] = max(
                max(operator_norm(a - b) for a, b in zip(expr.apply(pt).vars, pt.vars)) for pt in pts
            )
    return RigidityVerdict(
        fixes_origin=origin_residual <= hypothesis_tol,
        origin_residual=origin_residual,
        derivative_residual=deriv,
        identity_residual_at_levels=residuals,
        base_level=m,
        hypothesis_tol=hypothesis_tol,
        bounded=spec.bounded,
    )


def check_rigidity(expr, spec, base_level=1, probe_levels=(2, 3, 4), samples=20, seed=DEFAULT_SEED,
                   tolerance=1e-8, expect="identity", points=(), expected_deviation=None):
    """Turn a rigidity probe into a pass/fail report.

    ``expect`` is ``"identity"`` (hypotheses hold and the map is the identity),
    ``"hypothesis_fails"`` (origin or derivative hypothesis is violated) or
    ``"implication_fails"`` (hypotheses hold yet the map moves some point; the
    unbounded counterexample).  With ``expected_deviation`` the detected
    deviation must also match that magnitude to 1e-12.
    """
    start = time.perf_counter()
    v = rigidity_probe(expr, spec, base_level, probe_levels, samples, seed, points, tolerance)
    witnesses = [v.to_json()]
    if expect == "identity":
        res = max(v.origin_residual, v.derivative_residual, v.max_identity_residual())
        return _report("rigidity", seed, samples, res, tolerance, witnesses, start)
    if expect == "hypothesis_fails":
        res = max(v.origin_residual, v.derivative_residual)
        return _report("rigidity", seed, samples, res, tolerance, witnesses, start, expect_failure=True)
    if expect == "implication_fails":
        res = v.max_identity_residual()
        ok = v.hypotheses_hold
        if expected_deviation is not None:
            ok = ok and abs(res - expected_deviation) <= 1e-12
        return _report("rigidity", seed, samples, res, tolerance, witnesses, start, expect_failure=True, ok=ok)
    raise ValueError(f"unknown expectation {expect!r}")


# -- derivative at the origin

def _origin_image_norm(expr, spec, level):
    zero = NcPoint.zeros(spec.d, level)
    if not spec.contains(zero):
        raise OriginNotInDomainError(f"0 is not in {spec.kind} at level {level}")
    return max(operator_norm(v) for v in expr.apply(zero).vars), zero


def check_derivative_similarity_invariance(expr, spec, level=2, trials=20, seed=DEFAULT_SEED,
                                           tolerance=DERIVATIVE_TOL, expect_failure=False):
    """``D Phi(0)[s^-1 Z s] = s^-1 D Phi(0)[Z] s`` by finite differences."""
    start = time.perf_counter()
    origin, zero = _origin_image_norm(expr, spec, level)
    if origin > 1e-10:
        w = [{"hypothesis": "origin not fixed", "origin_image_norm": origin}]
        return _report("derivative_similarity_invariance", seed, trials, origin, tolerance, w, start,
                       expect_failure)
    worst, witness = 0.0, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        Z = NcPoint(ginibre(rng, spec.d, level, level) * 0.5)
        s = random_similarity(rng, level)
        lhs = directional_derivative(expr.apply, zero, conjugate(s, Z), domain=spec).value
        rhs = conjugate(s, directional_derivative(expr.apply, zero, Z, domain=spec).value)
        r = relative_residual(lhs, rhs)
        if witness is None or r > worst:
            worst, witness = r, {"trial": k, "residual": r, "Z": Z.to_json(), "s": encode_matrix(s)}
    return _report("derivative_similarity_invariance", seed, trials, worst, tolerance, [witness], start,
                   expect_failure)


def check_derivative_scheme(shape=(2, 2), level=2, trials=50, seed=DEFAULT_SEED, tolerance=DERIVATIVE_TOL):
    """Finite-difference ``D H_A(0)[H]`` against ``(I - AA*)^{1/2} H (I - A*A)^{1/2}``.

    The residual here is the plain relative error ``||fd - exact||_F / ||exact||_F``.
    """
    start = time.perf_counter()
    p, q = shape
    n = level
    spec = DomainSpec.rpq_ball(p, q)
    zero = NcPoint.zeros(p * q, n)
    worst, witness = 0.0, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        A = random_contraction(rng, p, q, rng.uniform(0.0, 0.9))
        H = ginibre(rng, n * p, n * q)
        fd = directional_derivative(HA(A).apply, zero, gamma_unpack(H, shape, n), domain=spec).value
        left = herm_sqrt_inv(amplify(np.eye(p) - A @ A.conj().T, n), 0.5)
        right = herm_sqrt_inv(amplify(np.eye(q) - A.conj().T @ A, n), 0.5)
        exact = left @ H @ right
        r = frobenius(gamma_pack(fd, shape) - exact) / frobenius(exact)
        if witness is None or r > worst:
            worst, witness = r, {"trial": k, "relative_error": r, "A": encode_matrix(A)}
    return _report("derivative_scheme", seed, trials, worst, tolerance, [witness], start)


# -- linear structure of origin-fixing automorphisms

def fit_linear_part(expr, spec, level=1, scale=0.5):
    """Recover ``F`` from ``Phi(c e_k E_00)[:, 0, 0] / c`` for each variable slot ``k``."""
    d = spec.d
    E = np.zeros((level, level), dtype=np.complex128)
    E[0, 0] = scale
    cols = [expr.apply(hat(E, k, d)).vars[:, 0, 0] / scale for k in range(d)]
    return np.stack(cols, axis=1)


def apply_linear_part(F, x):
    """``(F (x) id_n)(x)``: ``F`` acting on the d-vector of every matrix entry."""
    return NcPoint(np.einsum("kl,lij->kij", F, x.vars))


def check_linear_structure(expr, spec, levels=(1, 2, 3), trials=10, seed=DEFAULT_SEED,
                           tolerance=1e-10, expect_failure=False):
    """Fit ``F`` at the lowest level and compare ``Phi`` with ``F (x) id`` entrywise."""
    start = time.perf_counter()
    levels = _levels(spec, levels)
    base = levels[0]
    origin, _ = _origin_image_norm(expr, spec, base)
    if origin > 1e-10:
        w = [{"hypothesis": "origin not fixed", "origin_image_norm": origin}]
        return _report("linear_structure", seed, trials, origin, tolerance, w, start, expect_failure)
    F = fit_linear_part(expr, spec, base)
    smin = float(np.linalg.svd(F, compute_uv=False)[-1])
    worst, witness = 0.0, None
    for n in levels:
        for k in range(trials):
            x = sample_member(spec, n, trial_rng(seed, n, k))
            r = relative_residual(expr.apply(x), apply_linear_part(F, x))
            if witness is None or r > worst:
                worst, witness = r, {"level": n, "trial": k, "residual": r, "x": x.to_json()}
    info = {"F": encode_matrix(F), "min_singular_value": smin}
    return _report("linear_structure", seed, trials * len(levels), worst, tolerance, [info, witness], start,
                   expect_failure, ok=smin > 1e-10)


# -- range preservation

def check_von_neumann(theta=0.0, a=0.7, trials=100, seed=DEFAULT_SEED, level=4, tolerance=MARGIN_TOL):
    """``||m(Z)|| < 1`` for random strict contractions ``Z``; residual is ``max ||m(Z)|| - 1``."""
    start = time.perf_counter()
    worst, witness = -np.inf, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        Z = random_contraction(rng, level, level, rng.uniform(0.0, 0.99))
        r = operator_norm(mobius_apply(theta, a, Z)) - 1.0
        if witness is None or r > worst:
            worst, witness = r, {"trial": k, "margin": -r, "Z": encode_matrix(Z)}
    return _report("von_neumann", seed, trials, worst, tolerance, [witness], start)


def check_range_preservation(expr, spec, levels=(1, 2, 3, 4), trials=100, seed=DEFAULT_SEED,
                             tolerance=MARGIN_TOL):
    """Members map to members; residual is the largest ``-margin`` of an image."""
    start = time.perf_counter()
    levels = _levels(spec, levels)
    worst, witness = -np.inf, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        x = sample_member(spec, int(rng.choice(levels)), rng)
        v = membership(spec, expr.apply(x))
        r = -v.margin if v.margin is not None else np.inf
        if witness is None or r > worst:
            worst, witness = r, {"trial": k, "member": v.member, "margin": -r, "x": x.to_json()}
    return _report("range_preservation", seed, trials, min(worst, 1e300), tolerance, [witness], start)


def check_inverse_law(expr, spec, levels=(1, 2, 3, 4), trials=100, seed=DEFAULT_SEED, tolerance=ALGEBRAIC_TOL):
    """``expr.inverse()(expr(x)) = x`` on random members."""
    start = time.perf_counter()
    levels = _levels(spec, levels)
    inv = expr.inverse()
    worst, witness = 0.0, None
    for k in range(trials):
        rng = trial_rng(seed, k)
        x = sample_member(spec, int(rng.choice(levels)), rng)
        r = relative_residual(inv.apply(expr.apply(x)), x)
        if witness is None or r > worst:
            worst, witness = r, {"trial": k, "residual": r, "x": x.to_json()}
    return _report("inverse_law", seed, trials, worst, tolerance, [witness], start)


# -- spectral disk

def check_spectral_disk(radii=(1.0, 2.0, 2.0, 3.0), levels=(1, 2, 3, 4), trials=20, seed=DEFAULT_SEED,
                        tolerance=0.0):
    """Acceptance, rejection and certificate properties of the spectral disk.

    Per trial: a normal contraction must be accepted with ``s = I``; a point of
    spectral radius >= 1 must be rejected; a sampled member's certificate must
    re-verify, survive unitary conjugation, and certify the member's image
    under a random Mobius map.  The residual counts failed properties.
    """
    start = time.perf_counter()
    spec = DomainSpec.spectral_disk(radii)
    failures = []
    for k in range(trials):
        rng = trial_rng(seed, k)
        n = int(rng.choice(levels))
        r = spec.radius(n)
        u = random_unitary(rng, n)
        lam = rng.uniform(0, 0.95, n) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        normal = (u * lam) @ u.conj().T
        v = spectral_disk_search(normal, r)
        if v.member != YES or not np.array_equal(v.certificate, np.eye(n)):
            failures.append({"trial": k, "property": "normal accepted with s = I"})

        lam_out = lam.copy()
        lam_out[0] = rng.uniform(1.0, 1.5) * np.exp(2j * np.pi * rng.uniform())
        s = random_similarity(rng, n, eps=0.3)
        outside = s @ np.diag(lam_out) @ np.linalg.inv(s)
        if spectral_disk_search(outside, r).member != NO:
            failures.append({"trial": k, "property": "spectral radius >= 1 rejected"})

        x = sample_member(spec, n, rng)
        v = membership(spec, x)
        cert = v.certificate
        if not verify_certificate(x[0], cert, r):
            failures.append({"trial": k, "property": "certificate re-verifies"})
        w = random_unitary(rng, n)
        if not verify_certificate(w.conj().T @ x[0] @ w, w.conj().T @ cert @ w, r):
            failures.append({"trial": k, "property": "unitary conjugated certificate"})
        theta, a = rng.uniform(0, 2 * np.pi), 0.8 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        if not verify_certificate(mobius_apply(theta, a, x[0]), cert, r):
            failures.append({"trial": k, "property": "Mobius image certified", "level": n,
                             "condition": condition_number(cert)})
    return _report("spectral_disk", seed, trials, float(len(failures)), tolerance, failures, start)


# -- level restriction

def check_level_restriction(shape=(2, 2), generators=(2, 3), levels=(1, 2, 3, 4, 5), trials=20,
                            seed=DEFAULT_SEED, tolerance=0.0):
    """Membership in the level-restricted ball against the unrestricted one.

    Levels outside the semigroup must be refused; the others must agree with
    the unrestricted verdict.  Points straddle the boundary (packed norm in
    ``[0.5, 1.5]``).  The residual counts disagreements.
    """
    start = time.perf_counter()
    p, q = shape
    full = DomainSpec.rpq_ball(p, q)
    restricted = full.restrict(generators)
    mismatches = []
    for n in levels:
        for k in range(trials):
            rng = trial_rng(seed, n, k)
            x = gamma_unpack(random_contraction(rng, n * p, n * q, rng.uniform(0.5, 1.5)), shape, n)
            got = membership(restricted, x).member
            want = membership(full, x).member if restricted.has_level(n) else NO
            if got != want:
                mismatches.append({"level": n, "trial": k, "got": got, "expected": want})
    refused = [n for n in levels if not restricted.has_level(n)]
    w = mismatches or [{"refused_levels": refused, "generators": list(restricted.levels)}]
    return _report("level_restriction", seed, trials * len(levels), float(len(mismatches)), tolerance, w, start)
