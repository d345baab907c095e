"""scikit-learn style wrapper around :func:`train`."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .training import GanConfig, sample_noise, train


class MinimaxGAN(BaseEstimator):
    """Fit a small GAN to the rows of ``X``.

    Minibatches are drawn from ``X`` with replacement, so ``X`` plays the
    role of the data distribution. Hyperparameters mirror :class:`GanConfig`.
    """

    def __init__(self, noise_dim=2, noise="gaussian", batch_size=64, k=1, lr_d=0.05,
                 lr_g=0.05, iterations=5000, random_state=7, epsilon=1e-7,
                 g_loss="saturating", hidden=(16,), init_scale=0.05):
        self.noise_dim = noise_dim
        self.noise = noise
        self.batch_size = batch_size
        self.k = k
        self.lr_d = lr_d
        self.lr_g = lr_g
        self.iterations = iterations
        self.random_state = random_state
        self.epsilon = epsilon
        self.g_loss = g_loss
        self.hidden = hidden
        self.init_scale = init_scale

    def _config(self, data_dim):
        return GanConfig(
            data_dim=data_dim, noise_dim=self.noise_dim, noise=self.noise,
            batch_size=self.batch_size, k=self.k, lr_d=self.lr_d, lr_g=self.lr_g,
            iterations=self.iterations, seed=self.random_state, epsilon=self.epsilon,
            g_loss=self.g_loss, hidden=tuple(self.hidden), init_scale=self.init_scale,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        self.config_ = self._config(X.shape[1])
        self.n_features_in_ = X.shape[1]

        def sample_real(rng, m):
            return X[rng.integers(0, len(X), size=m)]

        self.generator_, self.discriminator_, self.metrics_ = train(self.config_, sample_real)
        return self

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "generator_")
        rng = np.random.default_rng(random_state)
        return self.generator_(sample_noise(self.config_, rng, n_samples))

    def predict_proba(self, X):
        """Discriminator's probability that each row is real data."""
        check_is_fitted(self, "discriminator_")
        X = check_array(X, dtype=float)
        p = self.discriminator_(X).ravel()
        return np.column_stack([1.0 - p, p])
