"""scikit-learn style wrappers around the purifier and the GCN classifier.

Graphs are passed next to the feature matrix: ``fit(X, adjacency)``,
``transform(X, adjacency)``.  Hyperparameters live in ``__init__`` so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import classifier as gcn
from .graph import LabeledGraph, SparseAdjacency
from .model import EdgeScores, GprGaeParams, predict_scores
from .perturb import PerturbationBudget
from .purify import PurificationTrace, PurifyConfig, estimate_lipschitz, purify
from .train import TrainConfig, train_purifier
from .validation import check_adjacency, check_features, check_index


class GPRGAEPurifier(TransformerMixin, BaseEstimator):
    """Graph purifier trained by self-supervised structure restoration.

    ``fit`` trains on a clean graph; ``transform`` runs multi-step
    purification and returns the purified weighted adjacency.

    Examples
    --------
    >>> from gprgae.datasets import planted_partition
    >>> g = planted_partition(n_nodes=60, random_state=0)
    >>> pur = GPRGAEPurifier(k=2, z1=8, z2=8, epochs=2).fit(g.features, g.adjacency)
    >>> pur.transform(g.features, g.adjacency).n
    60
    """

    def __init__(self, k=7, z1=128, z2=512, p=1.5, q=0.2, eta=3.0, delta=0.2, epochs=2000,
                 lr=0.01, weight_decay=1e-4, dropout=0.7, self_loops=False, reweight=True,
                 n_val_sets=10, alpha=1.0, tau=1e-3, max_steps=5, prune_eps=1e-4,
                 single_step_discretize=False, random_state=0):
        self.k = k
        self.z1 = z1
        self.z2 = z2
        self.p = p
        self.q = q
        self.eta = eta
        self.delta = delta
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.self_loops = self_loops
        self.reweight = reweight
        self.n_val_sets = n_val_sets
        self.alpha = alpha
        self.tau = tau
        self.max_steps = max_steps
        self.prune_eps = prune_eps
        self.single_step_discretize = single_step_discretize
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, weight_decay=self.weight_decay,
                           delta=self.delta, budget=PerturbationBudget(self.p, self.q, self.eta),
                           k=self.k, z1=self.z1, z2=self.z2, dropout=self.dropout,
                           self_loops=self.self_loops, reweight=self.reweight,
                           n_val_sets=self.n_val_sets, seed=self.random_state)

    def _purify_config(self) -> PurifyConfig:
        return PurifyConfig(alpha=self.alpha, tau=self.tau, max_steps=self.max_steps,
                            prune_eps=self.prune_eps,
                            single_step_discretize=self.single_step_discretize,
                            self_loops=self.self_loops)

    def fit(self, X, adjacency, callback=None):
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n)
        result = train_purifier(adjacency, X, self._train_config(), callback=callback)
        self.params_ = result.params
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_score_ = result.best_metric
        self.n_features_in_ = X.shape[1]
        return self

    def fit_graph(self, graph: LabeledGraph, callback=None):
        """Fit on the inductive training view (validation and test nodes removed)."""
        tr = graph.training_view()
        return self.fit(tr.features, tr.adjacency, callback=callback)

    @classmethod
    def from_params(cls, params: GprGaeParams, **kwargs) -> "GPRGAEPurifier":
        est = cls(k=params.k_max, z1=params.z1, z2=params.z2, **kwargs)
        est.params_ = params
        est.history_ = []
        est.n_features_in_ = params.n_features
        return est

    def purify(self, X, adjacency) -> PurificationTrace:
        check_is_fitted(self, "params_")
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n, self.n_features_in_)
        return purify(self.params_, adjacency, X, self._purify_config())

    def transform(self, X, adjacency) -> SparseAdjacency:
        self.trace_ = self.purify(X, adjacency)
        return self.trace_.final

    def fit_transform(self, X, adjacency, **fit_params) -> SparseAdjacency:
        return self.fit(X, adjacency, **fit_params).transform(X, adjacency)

    def predict_edges(self, X, adjacency, pairs) -> EdgeScores:
        check_is_fitted(self, "params_")
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n, self.n_features_in_)
        return predict_scores(self.params_, adjacency, X, pairs, self_loops=self.self_loops)

    def lipschitz(self, X, adjacency, pairs=100, max_budget=0.5, random_state=0) -> float:
        check_is_fitted(self, "params_")
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n, self.n_features_in_)
        return estimate_lipschitz(self.params_, adjacency, X, pairs, max_budget,
                                  np.random.default_rng(random_state), self.self_loops)


class GCNNodeClassifier(ClassifierMixin, BaseEstimator):
    """Two-layer GCN; inference accepts any positively weighted symmetric graph.

    ``y`` carries one label per node (``-1`` for unlabeled); ``train_idx``
    selects the supervised nodes.
    """

    def __init__(self, hidden=64, dropout=0.5, lr=0.01, weight_decay=1e-3, loss="tanh_margin",
                 max_epochs=3000, patience=200, random_state=0):
        self.hidden = hidden
        self.dropout = dropout
        self.lr = lr
        self.weight_decay = weight_decay
        self.loss = loss
        self.max_epochs = max_epochs
        self.patience = patience
        self.random_state = random_state

    def _config(self) -> gcn.ClassifierTrainConfig:
        return gcn.ClassifierTrainConfig(max_epochs=self.max_epochs, lr=self.lr,
                                         weight_decay=self.weight_decay, loss=self.loss,
                                         patience=self.patience, hidden=self.hidden,
                                         dropout=self.dropout, seed=self.random_state)

    def fit(self, X, y, adjacency, train_idx=None, eval_set=None):
        """``eval_set`` is ``(X, y, adjacency, idx)`` used for early stopping."""
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n)
        y = np.asarray(y, dtype=np.int64)
        train_idx = (np.flatnonzero(y >= 0) if train_idx is None
                     else check_index(train_idx, adjacency.n, "train_idx"))
        val = None
        if eval_set is not None:
            Xv, yv, av, iv = eval_set
            av = check_adjacency(av)
            val = (av, check_features(Xv, av.n, X.shape[1]), np.asarray(yv, dtype=np.int64),
                   check_index(iv, av.n, "eval index"))
        self.params_, self.history_ = gcn.train_classifier(adjacency, X, y, train_idx,
                                                           self._config(), val=val)
        self.classes_ = np.arange(self.params_.n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_graph(self, graph: LabeledGraph):
        """Inductive fit: train on the training view, early-stop on the validation view."""
        tr, va = graph.training_view(), graph.validation_view()
        return self.fit(tr.features, tr.labels, tr.adjacency, tr.train,
                        eval_set=(va.features, va.labels, va.adjacency, va.val))

    @classmethod
    def from_params(cls, params: gcn.GcnParams, **kwargs) -> "GCNNodeClassifier":
        est = cls(hidden=params.w1.shape[1], dropout=params.dropout, **kwargs)
        est.params_ = params
        est.history_ = []
        est.classes_ = np.arange(params.n_classes)
        est.n_features_in_ = params.w1.shape[0]
        return est

    def decision_function(self, X, adjacency) -> np.ndarray:
        check_is_fitted(self, "params_")
        adjacency = check_adjacency(adjacency)
        X = check_features(X, adjacency.n, self.n_features_in_)
        return gcn.logits(self.params_, adjacency, X)

    def predict(self, X, adjacency) -> np.ndarray:
        return np.argmax(self.decision_function(X, adjacency), axis=1)

    def score(self, X, y, adjacency, idx=None) -> float:
        pred = self.predict(X, adjacency)
        y = np.asarray(y)
        idx = np.flatnonzero(y >= 0) if idx is None else check_index(idx, len(y))
        return float(np.mean(pred[idx] == y[idx]))
