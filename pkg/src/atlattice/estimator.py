"""scikit-learn style wrapper around the alternating segmentation solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_positive, check_signal
from .energy import EnergyParams
from .lattice import Grid, ufield
from .solver import SolveConfig, alternate_minimize


class ATSegmenter(TransformerMixin, BaseEstimator):
    """Piecewise-smooth approximation of a signal or image.

    ``fit`` minimizes the fidelity-perturbed lattice energy for the datum
    ``X`` (a 1D signal or a 2D image, row 0 first).  The mesh is
    ``delta = 1 / max(X.shape)`` unless given, and ``epsilon = delta / ell``.

    Attributes set by ``fit``: ``u_`` (smoothed datum), ``v_`` (edge
    indicator, near 0 on edges), ``energy_trace_``, ``n_iter_``,
    ``converged_``.  ``transform`` refits on its argument and returns u, the
    usual behaviour for transductive smoothers.
    """

    def __init__(self, ell=0.125, delta=None, eta=0.0, fidelity_weight=1.0,
                 max_iter=200, tol=1e-8, linear_tol=1e-12):
        self.ell = ell
        self.delta = delta
        self.eta = eta
        self.fidelity_weight = fidelity_weight
        self.max_iter = max_iter
        self.tol = tol
        self.linear_tol = linear_tol

    def _params(self, shape):
        ell = check_positive(self.ell, "ell")
        delta = 1.0 / max(shape) if self.delta is None else check_positive(self.delta, "delta")
        return EnergyParams(delta / ell, delta, check_positive(self.eta, "eta", allow_zero=True),
                            check_positive(self.fidelity_weight, "fidelity_weight", allow_zero=True))

    def fit(self, X, y=None):
        X = check_signal(X)
        params = self._params(X.shape)
        config = SolveConfig(check_int(self.max_iter, "max_iter"), check_positive(self.tol, "tol"),
                             check_positive(self.linear_tol, "linear_tol"))
        grid = Grid.from_shape(X.shape, params.delta)
        res = alternate_minimize(ufield(grid, X.ravel()), params, config)
        self.u_ = res.u.to_array()
        self.v_ = res.v.to_array()
        self.energy_trace_ = [r.as_row() for r in res.trace]
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.params_ = params
        self.n_features_in_ = X.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "u_")
        return self.fit(X).u_

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).u_

    def edges(self, threshold=0.5) -> np.ndarray:
        """Boolean edge map ``v_ < threshold``."""
        check_is_fitted(self, "v_")
        return self.v_ < threshold
