"""scikit-learn style wrappers.

Decoders map syndromes ``X`` of shape ``(n_samples, m)`` to error estimates
of shape ``(n_samples, n)``; ``y`` holds the true errors. Because the
syndrome of an overcomplete matrix is a linear map of the measured one,
``make_pipeline(SyndromeMapper(oc), BP4Decoder(oc.s_oc))`` decodes measured
syndromes on the overcomplete graph.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_errors, check_syndromes
from .codes import CheckMatrix, check_logical_equivalence, compute_normalizer, compute_syndrome
from .decoder import DecoderGraph, NbpWeights, decode_batch
from .overcomplete import map_syndrome
from .training import AdamState, TrainingLog, adam_step, backward, forward, _LossTerms


class SyndromeMapper(TransformerMixin, BaseEstimator):
    """Maps measured syndromes to overcomplete syndromes, ``z_oc = M z``."""

    def __init__(self, overcomplete=None):
        self.overcomplete = overcomplete

    def fit(self, X, y=None):
        if self.overcomplete is None:
            raise ValueError("SyndromeMapper needs an overcomplete matrix")
        X = check_syndromes(X, self.overcomplete.code.m)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return map_syndrome(self.overcomplete, check_syndromes(X, self.n_features_in_))


class BP4Decoder(BaseEstimator):
    """Refined BP4 decoder over a fixed check matrix.

    ``fit`` only prepares the Tanner graph; ``predict`` decodes syndromes.
    """

    def __init__(self, check_matrix=None, max_iter=32, epsilon0=0.1, early_stop=True):
        self.check_matrix = check_matrix
        self.max_iter = max_iter
        self.epsilon0 = epsilon0
        self.early_stop = early_stop

    def _prepare(self):
        if self.check_matrix is None:
            raise ValueError("a check matrix is required")
        s = self.check_matrix if isinstance(self.check_matrix, CheckMatrix) else CheckMatrix(self.check_matrix)
        self.graph_ = DecoderGraph(s)
        self.s_perp_ = compute_normalizer(s)
        self.n_features_in_ = s.m

    def _weights(self):
        return None

    def fit(self, X=None, y=None):
        self._prepare()
        if X is not None:
            check_syndromes(X, self.graph_.m)
        return self

    def decode(self, X):
        """Full batch result (estimates, convergence flags, iterations used)."""
        check_is_fitted(self, "graph_")
        X = check_syndromes(X, self.graph_.m)
        return decode_batch(self.graph_, X, self.epsilon0, self.max_iter, self._weights(),
                            early_stop=self.early_stop)

    def predict(self, X):
        return self.decode(X).e_hat

    def score(self, X, y):
        """Fraction of samples decoded to a logically equivalent, syndrome-matching error."""
        res = self.decode(X)
        y = check_errors(y, self.graph_.n)
        ok = res.converged & check_logical_equivalence(y, res.e_hat, self.s_perp_)
        return float(np.mean(ok))


class NeuralBP4Decoder(BP4Decoder):
    """BP4 with trainable per-iteration check and qubit weights.

    ``fit(X, y)`` runs minibatch Adam on the multi-loss for the given
    syndromes and true errors. With ``warm_start`` the existing weights and
    optimizer state are kept.
    """

    def __init__(self, check_matrix=None, max_iter=3, epsilon0=0.1, early_stop=True,
                 learning_rate=1e-3, batch_size=100, n_epochs=1, loss_mode="all",
                 random_state=None, warm_start=False, initial_weights=None):
        super().__init__(check_matrix, max_iter, epsilon0, early_stop)
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.loss_mode = loss_mode
        self.random_state = random_state
        self.warm_start = warm_start
        self.initial_weights = initial_weights

    def _weights(self):
        return self.weights_ if hasattr(self, "weights_") else self.initial_weights

    def fit(self, X, y):
        if not (self.warm_start and hasattr(self, "weights_")):
            self._prepare()
            g = self.graph_
            w = self.initial_weights.copy() if self.initial_weights is not None else NbpWeights.ones(self.max_iter, g.m, g.n)
            self.weights_ = w
            self.adam_state_ = AdamState.zeros_like(w)
            self.training_log_ = TrainingLog()
        X = check_syndromes(X, self.graph_.m)
        y = check_errors(y, self.graph_.n)
        if len(X) != len(y):
            raise ValueError("X and y have different numbers of samples")
        if (compute_syndrome(self.graph_.s, y) != X).any():
            raise ValueError("syndromes X do not match the errors y")
        rng = np.random.default_rng(self.random_state)
        terms = _LossTerms(self.s_perp_)
        step = len(self.training_log_.rows)
        for epoch in range(self.n_epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), self.batch_size):
                idx = order[start:start + self.batch_size]
                trace = forward(self.graph_, X[idx], y[idx], self.weights_, self.s_perp_,
                                self.epsilon0, self.loss_mode, terms)
                grads = backward(self.graph_, trace, self.s_perp_, terms)
                self.weights_, self.adam_state_ = adam_step(self.weights_, grads, self.adam_state_,
                                                            self.learning_rate)
                self.training_log_.append(step, epoch + 1, float(trace.per_sample_loss.mean()))
                step += 1
        return self
