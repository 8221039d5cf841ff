"""scikit-learn wrappers so nc maps compose with pipelines and model tooling.

Batches of nc-points are arrays of shape ``(n_samples, d, n, n)``; every
sample in a batch shares one level.  A single ``(d, n, n)`` point is accepted
and returned unbatched.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .domains import DomainSpec, membership
from .maps import NcMap, map_from_json
from .matcore import NcPoint
from .validation import check_nc_array
from .verify import apply_linear_part, fit_linear_part


def _as_map(expr):
    if isinstance(expr, NcMap):
        return expr
    if isinstance(expr, dict):
        return map_from_json(expr)
    raise TypeError(f"expr must be an NcMap or its JSON encoding, got {type(expr).__name__}")


def _as_domain(domain):
    if domain is None or isinstance(domain, DomainSpec):
        return domain
    return DomainSpec.from_json(domain)


def _map_batch(f, X):
    return np.stack([f(NcPoint(x)).vars for x in X])


class NcMapTransformer(TransformerMixin, BaseEstimator):
    """Apply an nc map sample by sample.

    Parameters
    ----------
    expr : NcMap or dict
        The map, or its JSON encoding.
    domain : DomainSpec, dict or None
        When given together with ``check_domain=True``, inputs outside the
        domain are rejected with ``ValueError``.
    check_domain : bool
    """

    def __init__(self, expr=None, domain=None, check_domain=False):
        self.expr = expr
        self.domain = domain
        self.check_domain = check_domain

    def _validate(self, X):
        expr = _as_map(self.expr)
        batch, single = check_nc_array(X, n_vars=expr.d)
        domain = _as_domain(self.domain)
        if self.check_domain and domain is not None:
            for i, x in enumerate(batch):
                if not membership(domain, NcPoint(x)):
                    raise ValueError(f"sample {i} lies outside the {domain.kind} domain")
        return expr, batch, single

    def fit(self, X, y=None):
        expr, batch, _ = self._validate(X)
        self.expr_ = expr
        self.n_vars_in_ = batch.shape[1]
        self.level_ = batch.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "expr_")
        _, batch, single = self._validate(X)
        out = _map_batch(self.expr_.apply, batch)
        return out[0] if single else out

    def inverse_transform(self, X):
        check_is_fitted(self, "expr_")
        _, batch, single = self._validate(X)
        out = _map_batch(self.expr_.inverse().apply, batch)
        return out[0] if single else out


class NcLinearPart(BaseEstimator):
    """Recover the scalar matrix ``F`` of an origin-fixing automorphism.

    ``fit`` probes the map at ``level`` along the (0, 0) matrix unit in each
    variable slot; ``predict`` evaluates ``F (x) id_n``; ``score`` is minus the
    largest entrywise deviation of the map from ``F (x) id_n`` on ``X``.
    """

    def __init__(self, expr=None, domain=None, level=1):
        self.expr = expr
        self.domain = domain
        self.level = level

    def fit(self, X=None, y=None):
        expr = _as_map(self.expr)
        domain = _as_domain(self.domain)
        if domain is None:
            raise ValueError("NcLinearPart needs a domain to probe the map")
        zero = NcPoint.zeros(domain.d, self.level)
        if np.abs(expr.apply(zero).vars).max() > 1e-10:
            raise ValueError("the map does not fix the origin; it has no linear part of this kind")
        self.expr_ = expr
        self.coef_ = fit_linear_part(expr, domain, self.level)
        self.singular_values_ = np.linalg.svd(self.coef_, compute_uv=False)
        self.n_vars_in_ = domain.d
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        batch, single = check_nc_array(X, n_vars=self.n_vars_in_)
        out = np.stack([apply_linear_part(self.coef_, NcPoint(x)).vars for x in batch])
        return out[0] if single else out

    def score(self, X, y=None):
        check_is_fitted(self, "coef_")
        batch, _ = check_nc_array(X, n_vars=self.n_vars_in_)
        pred = self.predict(batch)
        actual = _map_batch(self.expr_.apply, batch)
        return -float(np.abs(pred - actual).max())
