import json

import numpy as np
import pytest

from ncauto.domains import DomainSpec, membership, sample_member
from ncauto.maps import (
    HA,
    Compose,
    CounterexampleMap,
    DomainViolationError,
    Identity,
    LinearIsometry,
    MobiusTuple,
    TransposeAmplification,
    apply,
    ha_apply,
    invert,
    linear_isometry_apply,
    map_from_json,
    mobius_apply,
    polydisk_auto_apply,
    transpose_amplify,
)
from ncauto.matcore import (
    NcPoint,
    gamma_pack,
    ginibre,
    operator_norm,
    random_contraction,
    random_unitary,
    relative_residual,
    trial_rng,
)
from ncauto.validation import DimensionMismatchError


def inv2(M):
    """Closed-form 2x2 inverse (adjugate over determinant)."""
    a, b, c, d = M.ravel()
    return np.array([[d, -b], [-c, a]]) / (a * d - b * c)


def swap_unitary(p):
    X = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            X[i * p + j, j * p + i] = 1.0
    return X


class TestMobius:
    def test_identity_parameters(self, rng):
        Z = random_contraction(rng, 3, 3, 0.7)
        np.testing.assert_allclose(mobius_apply(0.0, 0.0, Z), Z, atol=1e-15)

    def test_sends_a_to_zero(self):
        a = 0.3 - 0.4j
        np.testing.assert_allclose(mobius_apply(1.1, a, a * np.eye(3)), 0, atol=1e-15)

    def test_jordan_closed_form(self):
        Z = np.array([[0.0, 0.5], [0.0, 0.0]])
        expected = (Z - 0.5 * np.eye(2)) @ inv2(np.eye(2) - 0.5 * Z)
        np.testing.assert_allclose(expected, [[-0.5, 0.375], [0.0, -0.5]])
        np.testing.assert_allclose(mobius_apply(0.0, 0.5, Z), expected, atol=1e-15)

    def test_scalar_inverse_roundtrip(self, rng):
        for _ in range(50):
            theta = rng.uniform(0, 2 * np.pi)
            a = 0.9 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            z = 0.95 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            m = MobiusTuple([theta], [a])
            w = m.apply(NcPoint([[[z]]]))
            back = invert(m).apply(w)
            assert abs(back[0][0, 0] - z) < 1e-12
            # scalar formula written out directly
            assert abs(w[0][0, 0] - np.exp(1j * theta) * (z - a) / (1 - np.conj(a) * z)) < 1e-14

    def test_normal_matrix_eigen_oracle(self, rng):
        u = random_unitary(rng, 4)
        lam = 0.9 * np.exp(2j * np.pi * rng.uniform(size=4)) * rng.uniform(size=4)
        Z = (u * lam) @ u.conj().T
        theta, a = 0.4, 0.6 + 0.1j
        expected = max(abs(np.exp(1j * theta) * (l - a) / (1 - np.conj(a) * l)) for l in lam)
        assert operator_norm(mobius_apply(theta, a, Z)) == pytest.approx(expected, rel=1e-12)

    def test_rejects_bad_parameter(self):
        with pytest.raises(ValueError):
            mobius_apply(0.0, 1.0, np.zeros((2, 2)))


class TestPolydiskAutomorphism:
    def test_identity(self, rng):
        x = NcPoint([random_contraction(rng, 2, 2, 0.5) for _ in range(3)])
        assert relative_residual(polydisk_auto_apply([0, 1, 2], [(0, 0)] * 3, x), x) == 0

    def test_swap(self, rng):
        x = NcPoint([random_contraction(rng, 2, 2, 0.5) for _ in range(2)])
        y = MobiusTuple([0, 0], [0, 0], [1, 0]).apply(x)
        np.testing.assert_array_equal(y[0], x[1])
        np.testing.assert_array_equal(y[1], x[0])

    def test_stays_in_polydisk(self, rng):
        spec = DomainSpec.polydisk(3)
        phi = MobiusTuple([0.1, 2.0, -1.0], [0.7, -0.5j, 0.2 + 0.2j], [2, 0, 1])
        for k in range(100):
            r = trial_rng(5, k)
            x = sample_member(spec, int(r.integers(1, 5)), r)
            assert membership(spec, phi.apply(x)).margin > 0

    def test_outside_rejected(self):
        with pytest.raises(DomainViolationError):
            MobiusTuple([0], [0.2]).apply(NcPoint([[[1.0]]]))

    def test_inverse(self, rng):
        phi = MobiusTuple([0.3, -1.2, 2.0], [0.5j, 0.1, -0.6], [1, 2, 0])
        spec = DomainSpec.polydisk(3)
        x = sample_member(spec, 3, rng)
        assert relative_residual(Compose((invert(phi), phi)).apply(x), x) < 1e-12
        assert relative_residual(Compose((phi, invert(phi))).apply(x), x) < 1e-12


class TestLinearIsometry:
    def test_identity(self, rng):
        x = NcPoint(ginibre(rng, 6, 2, 2))
        assert linear_isometry_apply(np.eye(2), np.eye(3), (2, 3), x) == x

    def test_level_one_collapse(self, rng):
        U, V = random_unitary(rng, 2), random_unitary(rng, 3)
        x = NcPoint.from_scalars(ginibre(rng, 6))
        y = LinearIsometry(U, V).apply(x)
        np.testing.assert_allclose(gamma_pack(y, (2, 3)), U @ gamma_pack(x, (2, 3)) @ V, atol=1e-15)

    def test_packed_norm_preserved(self, rng):
        U, V = random_unitary(rng, 3), random_unitary(rng, 2)
        x = NcPoint(ginibre(rng, 6, 4, 4))
        y = LinearIsometry(U, V).apply(x)
        assert operator_norm(gamma_pack(y, (3, 2))) == pytest.approx(operator_norm(gamma_pack(x, (3, 2))), rel=1e-10)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            LinearIsometry(np.diag([1.0, 2.0]), np.eye(2))


class TestTranspose:
    def test_scalar_blocks_transpose(self, rng):
        X = ginibre(rng, 3, 3)
        np.testing.assert_array_equal(transpose_amplify(3, X), X.T)

    def test_block_diagonal_fixed(self, rng):
        X = np.zeros((6, 6), dtype=complex)
        X[:2, :2], X[2:4, 2:4], X[4:, 4:] = ginibre(rng, 3, 2, 2)
        np.testing.assert_array_equal(transpose_amplify(3, X), X)

    def test_blocks_not_transposed(self, rng):
        X = ginibre(rng, 4, 4)
        Y = transpose_amplify(2, X)
        np.testing.assert_array_equal(Y[:2, 2:], X[2:, :2])
        np.testing.assert_array_equal(Y[2:, :2], X[:2, 2:])

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_swap_witness_eigen_oracle(self, p):
        X = swap_unitary(p)
        assert operator_norm(X) == pytest.approx(1.0)
        Y = transpose_amplify(p, X)
        psi = np.eye(p).ravel() / np.sqrt(p)
        np.testing.assert_allclose(Y, p * np.outer(psi, psi), atol=1e-15)
        eig = np.linalg.eigvalsh(Y)
        np.testing.assert_allclose(eig[-1], p)
        np.testing.assert_allclose(eig[:-1], 0, atol=1e-12)

    def test_indivisible(self):
        with pytest.raises(DimensionMismatchError):
            transpose_amplify(2, np.zeros((3, 3)))


class TestHA:
    def test_zero_parameter(self, rng):
        Z = random_contraction(rng, 4, 6, 0.8)
        np.testing.assert_allclose(ha_apply(np.zeros((2, 3)), (2, 3), Z), Z, atol=1e-15)

    def test_origin_image(self, rng):
        A = random_contraction(rng, 2, 3, 0.6)
        P = np.eye(2) - A @ A.conj().T
        Q = np.eye(3) - A.conj().T @ A
        w, V = np.linalg.eigh(P)
        Pm = (V / np.sqrt(w)) @ V.conj().T
        w, V = np.linalg.eigh(Q)
        Qp = (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T
        expected = Pm @ A @ Qp
        np.testing.assert_allclose(HA(A).origin_image(), expected, atol=1e-14)
        n = 2
        np.testing.assert_allclose(ha_apply(A, (2, 3), np.zeros((4, 6))), np.kron(expected, np.eye(n)), atol=1e-14)

    def test_scalar_origin(self):
        a = 0.4 - 0.3j
        assert abs(ha_apply(np.array([[a]]), (1, 1), np.zeros((1, 1)))[0, 0] - a) < 1e-15

    def test_scalar_rational_oracle(self, rng):
        for _ in range(100):
            a = 0.95 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            z = 0.99 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            got = ha_apply(np.array([[a]]), (1, 1), np.array([[z]]))[0, 0]
            assert abs(got - (z + a) / (1 + np.conj(a) * z)) < 1e-12

    @pytest.mark.parametrize("shape", [(1, 1), (2, 2), (2, 3), (3, 1)])
    def test_inverse_law(self, shape):
        spec = DomainSpec.rpq_ball(*shape)
        for k in range(100):
            r = trial_rng(9, k)
            A = random_contraction(r, *shape, r.uniform(0, 0.9))
            x = sample_member(spec, int(r.integers(1, 4)), r)
            y = HA(A).apply(x)
            assert membership(spec, y).margin > 0
            assert relative_residual(HA(-A).apply(y), x) <= 1e-9

    def test_requires_strict_contraction(self):
        with pytest.raises(ValueError):
            HA(np.eye(2))


class TestCounterexample:
    def test_level_one_identity(self, rng):
        x = NcPoint.from_scalars(ginibre(rng, 3))
        assert CounterexampleMap().apply(x) == x

    def test_level_two_shift(self):
        E12 = np.array([[0, 1.0], [0, 0]])
        x = NcPoint([0.9 * E12, 0.9 * E12.T, np.zeros((2, 2))])
        y = CounterexampleMap((0, 1)).apply(x)
        np.testing.assert_allclose(y[2], 0.81 * np.diag([1.0, -1.0]), atol=1e-15)
        np.testing.assert_array_equal(y[0], x[0])

    def test_polynomial_horner(self, rng):
        x = NcPoint(0.5 * ginibre(rng, 3, 3, 3))
        c = x[0] @ x[1] - x[1] @ x[0]
        y = CounterexampleMap((0, 2.0, 0, -1j)).apply(x)
        np.testing.assert_allclose(y[2], x[2] + 2 * c - 1j * c @ c @ c, atol=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            CounterexampleMap((1.0, 1.0))
        with pytest.raises(ValueError):
            CounterexampleMap((0.0,))

    def test_closed_form_inverse(self, rng):
        phi = CounterexampleMap((0, 1, 0.5))
        x = NcPoint(ginibre(rng, 3, 3, 3))
        assert relative_residual(invert(phi).apply(phi.apply(x)), x) < 1e-14


class TestCompose:
    def test_right_to_left(self):
        swap = MobiusTuple([0, 0], [0, 0], [1, 0])
        rot = MobiusTuple([np.pi / 2, 0], [0, 0])
        x = NcPoint.from_scalars([0.5, 0.25])
        y = Compose((rot, swap)).apply(x)  # swap first, then rotate slot 0
        np.testing.assert_allclose(y.vars.ravel(), [0.25j, 0.5])

    def test_arity_checked(self):
        with pytest.raises(DimensionMismatchError):
            Compose((Identity(2), Identity(3)))
        with pytest.raises(DimensionMismatchError):
            Identity(2).apply(NcPoint.zeros(3, 1))

    def test_levels_preserved(self, rng):
        A = random_contraction(rng, 2, 2, 0.5)
        f = Compose((LinearIsometry(random_unitary(rng, 2), random_unitary(rng, 2)), HA(A)))
        for n in (1, 2, 3):
            x = sample_member(DomainSpec.rpq_ball(2, 2), n, rng)
            assert f.apply(x).level == n

    def test_inverse_of_composite(self, rng):
        A = random_contraction(rng, 2, 3, 0.7)
        f = Compose((LinearIsometry(random_unitary(rng, 2), random_unitary(rng, 3)), HA(A)))
        spec = DomainSpec.rpq_ball(2, 3)
        for k in range(20):
            x = sample_member(spec, 2, trial_rng(1, k))
            assert relative_residual(Compose((invert(f), f)).apply(x), x) <= 1e-9

    def test_invert_identity(self):
        assert isinstance(invert(Identity(3)), Identity)
        assert invert(TransposeAmplification(2)).p == 2

    def test_apply_dispatch(self):
        x = NcPoint.zeros(2, 2)
        assert apply(Identity(2), x) is x


def test_json_roundtrip(rng):
    A = random_contraction(rng, 2, 3, 0.5)
    exprs = [
        Identity(2),
        MobiusTuple([0.3, 1.0], [0.2 + 0.1j, -0.4], [1, 0]),
        LinearIsometry(random_unitary(rng, 2), random_unitary(rng, 3)),
        TransposeAmplification(3),
        HA(A),
        CounterexampleMap((0, 1, 0.5j)),
        Compose((HA(A), LinearIsometry(np.eye(2), np.eye(3)))),
    ]
    x = NcPoint(0.1 * ginibre(rng, 6, 2, 2))
    for e in exprs:
        obj = json.loads(json.dumps(e.to_json()))
        back = map_from_json(obj)
        assert back.to_json() == e.to_json()
        assert obj["variant"] == type(e).__name__
    assert relative_residual(map_from_json(exprs[-1].to_json()).apply(x), exprs[-1].apply(x)) == 0
    with pytest.raises(ValueError):
        map_from_json({"variant": "Nope"})
