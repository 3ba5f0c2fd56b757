"""scikit-learn style wrappers.

``PatternDensityTransformer`` maps permutations to pattern densities, one
column per pattern.  ``LayeredPermutonMaximizer`` fits the best K-layer
permuton for one layered pattern and scores permutons against it.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .counting import density
from .exceptions import ValidationError
from .optimizer import OptConfig, maximize_fixed_K
from .permuton import density_value, embed_permutation
from .validation import (
    check_lengths_batch,
    check_permutation,
    check_permutation_batch,
    check_positive_int,
    check_shape,
    check_tolerance,
)


class PatternDensityTransformer(TransformerMixin, BaseEstimator):
    """Densities of fixed patterns in each input permutation.

    Parameters
    ----------
    patterns : list of permutations (one-line notation)
    exact : if True, ``transform`` returns an object array of Fractions.
    """

    def __init__(self, patterns=((1, 2),), exact=False):
        self.patterns = patterns
        self.exact = exact

    def fit(self, X=None, y=None):
        pats = [check_permutation(p, name="pattern") for p in self.patterns]
        if not pats:
            raise ValidationError("need at least one pattern")
        self.patterns_ = pats
        self.n_features_out_ = len(pats)
        return self

    def transform(self, X):
        if not hasattr(self, "patterns_"):
            raise NotFittedError("call fit before transform")
        rows = check_permutation_batch(X)
        out = np.empty((len(rows), len(self.patterns_)), dtype=object if self.exact else float)
        for i, p in enumerate(rows):
            for j, s in enumerate(self.patterns_):
                # a pattern longer than the host has density zero here
                d = density(s, p) if s.order <= p.order else 0
                out[i, j] = d if self.exact else float(d)
        return out

    def get_feature_names_out(self, input_features=None):
        if not hasattr(self, "patterns_"):
            raise NotFittedError("call fit first")
        return np.array(["d_" + "".join(map(str, p.values)) for p in self.patterns_], dtype=object)


class LayeredPermutonMaximizer(BaseEstimator):
    """Maximize the density of a layered pattern over K-layer permutons.

    ``fit`` ignores X.  After fitting, ``lengths_`` and ``value_`` hold the
    best permuton found; ``score_samples`` evaluates the pattern density of
    other permutons (rows of layer lengths), and ``score`` averages it.
    """

    def __init__(self, pattern=(1, 2), n_layers=4, restarts=16, max_iter=4000, tol=1e-9, random_state=0):
        self.pattern = pattern
        self.n_layers = n_layers
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _config(self) -> OptConfig:
        seed = self.random_state if self.random_state is not None else 0
        return OptConfig(
            restarts=check_positive_int(self.restarts, "restarts", minimum=0),
            max_iters=check_positive_int(self.max_iter, "max_iter"),
            tol=check_tolerance(self.tol),
            seed=int(seed),
        )

    def fit(self, X=None, y=None):
        self.shape_ = check_shape(self.pattern)
        K = check_positive_int(self.n_layers, "n_layers")
        self.result_ = maximize_fixed_K(self.shape_, K, self._config())
        self.lengths_ = np.asarray(self.result_.lengths.lengths)
        self.value_ = self.result_.value
        self.converged_ = self.result_.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit first")

    def predict(self, X=None):
        """The fitted optimum's layer lengths, one row per input row."""
        self._check_fitted()
        n = 1 if X is None else len(X)
        return np.tile(self.lengths_, (n, 1))

    def score_samples(self, X):
        shape = self.shape_ if hasattr(self, "shape_") else check_shape(self.pattern)
        return np.array([density_value(shape, x) for x in check_lengths_batch(X)])

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def score_permutations(self, X):
        """Pattern density of the permutons embedding each layered permutation."""
        rows = check_permutation_batch(X)
        return self.score_samples([embed_permutation(p) for p in rows])
