import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ncauto.domains import DomainSpec, sample_member
from ncauto.estimators import NcLinearPart, NcMapTransformer
from ncauto.maps import HA, LinearIsometry, MobiusTuple
from ncauto.matcore import NcPoint, random_contraction, random_unitary
from ncauto.validation import DimensionMismatchError


def batch(spec, level, rng, k=5):
    return np.stack([sample_member(spec, level, rng).vars for _ in range(k)])


def test_transformer_roundtrip(rng):
    spec = DomainSpec.rpq_ball(2, 2)
    t = NcMapTransformer(HA(random_contraction(rng, 2, 2, 0.6)), spec, check_domain=True)
    X = batch(spec, 3, rng)
    Y = t.fit_transform(X)
    assert Y.shape == X.shape and t.level_ == 3 and t.n_vars_in_ == 4
    np.testing.assert_allclose(t.inverse_transform(Y), X, atol=1e-10)


def test_transformer_single_point_and_json(rng):
    expr = MobiusTuple([0.2], [0.1j])
    t = NcMapTransformer(expr.to_json()).fit(np.zeros((1, 2, 2)))
    y = t.transform(0.3 * np.eye(2)[None])
    assert y.shape == (1, 2, 2)
    np.testing.assert_allclose(y, expr.apply(NcPoint(0.3 * np.eye(2)[None])).vars)


def test_transformer_checks(rng):
    spec = DomainSpec.polydisk(1)
    t = NcMapTransformer(MobiusTuple([0.0], [0.0]), spec, check_domain=True)
    with pytest.raises(NotFittedError):
        t.transform(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        t.fit(2 * np.eye(2)[None])
    with pytest.raises(DimensionMismatchError):
        t.fit(np.zeros((2, 2, 2)))


def test_clone_and_params():
    t = NcMapTransformer(MobiusTuple([0.0], [0.0]), check_domain=True)
    c = clone(t)
    assert c.get_params()["check_domain"] is True and c is not t


def test_linear_part(rng):
    U, V = random_unitary(rng, 2), random_unitary(rng, 2)
    spec = DomainSpec.rpq_ball(2, 2)
    est = NcLinearPart(LinearIsometry(U, V), spec).fit()
    np.testing.assert_allclose(est.coef_, np.kron(U, V.T), atol=1e-12)
    np.testing.assert_allclose(est.singular_values_, np.ones(4), atol=1e-12)
    X = batch(spec, 2, rng)
    assert est.score(X) > -1e-12


def test_linear_part_needs_fixed_origin(rng):
    with pytest.raises(ValueError):
        NcLinearPart(HA(random_contraction(rng, 2, 2, 0.5)), DomainSpec.rpq_ball(2, 2)).fit()
    with pytest.raises(ValueError):
        NcLinearPart(MobiusTuple([0.0], [0.0])).fit()
