"""Estimator-style wrappers around the solvers."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .capacity import Dmc, capacity
from .exponent import theta
from .probcore import CondPmf, JointPmf
from .simulator import DecisionRule, SymbolwiseEncoder, likelihood_rule


def _joint(X):
    return X if isinstance(X, JointPmf) else JointPmf(X)


def _channel(X):
    return X if isinstance(X, Dmc) else Dmc(X)


class BlahutArimoto(BaseEstimator):
    """Capacity of a DMC.

    ``fit`` takes the transition matrix with rows P(.|x).
    """

    def __init__(self, tol=1e-9, max_iter=100_000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        res = capacity(_channel(X), tol=self.tol, max_iter=self.max_iter)
        self.capacity_ = res.value
        self.input_dist_ = res.input_dist.probs
        self.n_iter_ = res.iterations
        self.gap_ = res.gap
        return self


class TaiExponent(BaseEstimator, TransformerMixin):
    """Optimal exponent theta(P_UV, C) and a maximising auxiliary channel.

    ``fit`` takes the joint matrix P_UV. ``transform`` maps U letters to the
    rows P(w|u) of the fitted auxiliary channel.
    """

    def __init__(self, capacity=0.0, mu_grid=None, restarts=64, seed=0, refine=True):
        self.capacity = capacity
        self.mu_grid = mu_grid
        self.restarts = restarts
        self.seed = seed
        self.refine = refine

    def fit(self, X, y=None):
        res = theta(_joint(X), self.capacity, mu_grid=self.mu_grid,
                    restarts=self.restarts, seed=self.seed, refine=self.refine)
        self.theta_ = res.theta
        self.best_mu_ = res.best_mu
        self.best_aux_ = res.best_aux.rows
        self.mu_trace_ = list(res.mu_trace)
        return self

    def transform(self, X):
        check_is_fitted(self, "best_aux_")
        return self.best_aux_[np.asarray(X, dtype=int)]


class LikelihoodRatioDetector(BaseEstimator):
    """Log-likelihood threshold test of H0: P_UV against H1: P_U x P_V.

    Parameters
    ----------
    channel : array-like
        Transition matrix P(y|x).
    encoder : array-like or None
        Per-letter map P(x|u); identity when None.
    n : int
        Blocklength.
    target_alpha : float
        Largest admissible type-I error.

    ``fit`` takes P_UV. ``predict(V, Y)`` takes (m, n) integer arrays and
    returns 0 for H0 and 1 for H1.
    """

    def __init__(self, channel=None, encoder=None, n=4, target_alpha=0.1):
        self.channel = channel
        self.encoder = encoder
        self.n = n
        self.target_alpha = target_alpha

    def fit(self, X, y=None):
        source = _joint(X)
        dmc = _channel(self.channel)
        enc = CondPmf.identity(source.shape[0]) if self.encoder is None else CondPmf(self.encoder)
        self.rule_: DecisionRule = likelihood_rule(source, dmc, SymbolwiseEncoder(enc),
                                                   self.n, self.target_alpha)
        self.threshold_ = self.rule_.threshold
        return self

    def decision_function(self, V, Y):
        check_is_fitted(self, "rule_")
        return self.rule_.scores(np.atleast_2d(V), np.atleast_2d(Y)) - self.threshold_

    def predict(self, V, Y):
        check_is_fitted(self, "rule_")
        return (~self.rule_.accepts(np.atleast_2d(V), np.atleast_2d(Y))).astype(int)
