"""scikit-learn style wrappers around the functional API.

Hyperparameters go to ``__init__``; ``fit`` does the work and sets
trailing-underscore attributes.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .coding.construction import build_code, evaluate_code
from .coding.optimize import optimize_capacity
from .tensor_core import apply_map
from .typicality import DEFAULT_SCHEDULE, HaarSampler, typical_projector
from .validation import check_channel, check_positive_int, check_seed, check_state


class CapacityOptimizer(BaseEstimator):
    """Search for a good constrained input; ``rate_`` is a lower bound on the capacity."""

    def __init__(self, dim_A=2, env_dim=2, restarts=10, max_iter=2000, seed=0, n_jobs=1):
        self.dim_A = dim_A
        self.env_dim = env_dim
        self.restarts = restarts
        self.max_iter = max_iter
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, channel, y=None, warm_start=None):
        check_channel(channel)
        res = optimize_capacity(
            channel,
            check_positive_int(self.dim_A, "dim_A"),
            check_positive_int(self.env_dim, "env_dim"),
            check_positive_int(self.restarts, "restarts"),
            HaarSampler(check_seed(self.seed)),
            max_iter=check_positive_int(self.max_iter, "max_iter"),
            warm_start=warm_start,
            n_jobs=self.n_jobs,
        )
        self.result_ = res
        self.best_sigma_ = res.best_sigma
        self.rate_ = res.rate
        self.classical_rate_ = res.classical_rate
        return self

    def score(self, channel=None, y=None):
        check_is_fitted(self, "rate_")
        return self.rate_


class CodeBuilder(BaseEstimator):
    """Build a code for ``n`` uses; ``score`` is ``1 - epsilon/2``."""

    def __init__(self, n=1, sizes=None, seed=0, schedule=DEFAULT_SCHEDULE):
        self.n = n
        self.sizes = sizes
        self.seed = seed
        self.schedule = schedule

    def fit(self, sigma, channel):
        check_channel(channel)
        sigma = check_state(sigma)
        art = build_code(sigma, channel, check_positive_int(self.n, "n"), self.sizes,
                         HaarSampler(check_seed(self.seed)), schedule=self.schedule)
        self.artifacts_ = art
        self.epsilon_ = art.epsilon_achieved
        self.channel_ = channel
        return self

    def score(self, sigma=None, channel=None):
        check_is_fitted(self, "artifacts_")
        ch = self.channel_ if channel is None else channel
        eps = evaluate_code(self.artifacts_.W_enc, self.artifacts_.V_dec, ch, self.artifacts_.n)
        return 1.0 - eps / 2.0


class TypicalSubspace(TransformerMixin, BaseEstimator):
    """Compress ``n``-copy states onto the typical subspace of a fitted ``rho``."""

    def __init__(self, n=2, epsilon=0.25):
        self.n = n
        self.epsilon = epsilon

    def fit(self, rho, y=None):
        rho = check_state(rho)
        tp = typical_projector(rho.density(), check_positive_int(self.n, "n"), float(self.epsilon))
        self.projector_ = tp
        self.typical_dim_ = tp.typical_dim
        self.mass_ = tp.mass
        return self

    def transform(self, state):
        check_is_fitted(self, "projector_")
        return apply_map(self.projector_.compression, state)

    def inverse_transform(self, state):
        check_is_fitted(self, "projector_")
        return apply_map(self.projector_.isometry, state)
