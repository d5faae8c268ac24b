"""scikit-learn style wrapper around tensor construction and the solvers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import affinity as aff
from . import solvers
from .errors import ConfigInvalid
from .tensor3 import SparseTensor3


class HypergraphMatcher(BaseEstimator):
    """Match 2-D point set ``X`` (source) to point set ``Y`` (target).

    ``fit(X, Y)`` builds the third-order affinity tensor and runs the chosen
    solver. ``predict()`` returns the target index of every source point.
    """

    def __init__(self, algo="adapt-bcagm3+mp", knn=aff.DEFAULT_KNN, gamma=None, triples_sampled=None,
                 feature="sines", random_state=0):
        self.algo = algo
        self.knn = knn
        self.gamma = gamma
        self.triples_sampled = triples_sampled
        self.feature = feature
        self.random_state = random_state

    def _check_algo(self):
        if self.algo not in solvers.ALGORITHMS:
            raise ConfigInvalid(f"unknown algorithm {self.algo!r}")

    def fit(self, X, Y):
        self._check_algo()
        X = check_array(X, dtype=np.float64)
        Y = check_array(Y, dtype=np.float64)
        cfg = aff.AffinityConfig(
            gamma=self.gamma,
            triples_sampled=self.triples_sampled,
            knn=self.knn,
            feature=self.feature,
            seed=int(self.random_state or 0),
        )
        F = aff.build_tensor(aff.PointSet(X), aff.PointSet(Y), cfg)
        return self.fit_tensor(F)

    def fit_tensor(self, F: SparseTensor3):
        """Skip tensor construction and solve on a given affinity tensor."""
        self._check_algo()
        if not isinstance(F, SparseTensor3):
            raise ConfigInvalid("fit_tensor needs a SparseTensor3")
        self.tensor_ = F
        self.result_ = solvers.solve(F, self.algo)
        self.assignment_ = np.asarray(self.result_.x_star.cols, dtype=np.intp)
        self.score_ = self.result_.score
        self.n_iter_ = self.result_.iterations
        return self

    def predict(self, X=None):
        check_is_fitted(self, "assignment_")
        return self.assignment_.copy()

    def fit_predict(self, X, Y):
        return self.fit(X, Y).predict()

    def score(self, X=None, y=None):
        """Accuracy against ground truth ``y`` when given, else the matching score."""
        check_is_fitted(self, "assignment_")
        if y is None:
            return self.score_
        y = np.asarray(y, dtype=np.intp)
        return float(np.mean(self.assignment_[: len(y)] == y))
