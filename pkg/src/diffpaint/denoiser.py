"""Noise predictors: the exact Gaussian-mixture oracle and a trainable MLP.

Both implement the same contract: predict_eps(x_t, t, sched) returns the
estimate of the cumulative noise eps that produced x_t from a clean sample
under the collapsed noising law x_t = sqrt(abar_t) x_0 + sqrt(1-abar_t) eps.

For a Gaussian-mixture data prior the L2-optimal predictor has a closed form:
the mixture marginal at level t has components N(sqrt(abar_t) mu_k,
abar_t Sigma_k + (1-abar_t) I), the posterior mean E[x_0 | x_t] is the
responsibility-weighted combination of the per-component linear regressions,
and

    eps_hat = (x_t - sqrt(abar_t) E[x_0 | x_t]) / sqrt(1 - abar_t).

The MLP is a small tanh network over [x, sinusoidal features of t], trained
with plain SGD (optional momentum) on the noise-prediction MSE. Everything is
float64 and fully deterministic given the explicit RNG.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import logsumexp

from .schedule import NoiseSchedule
from .tensorio import TensorFormatError, read_tensor, write_tensor

_LOG_2PI = float(np.log(2.0 * np.pi))

CHECKPOINT_MAGIC = b"MLPD"
CHECKPOINT_VERSION = 1


class NonFiniteGradientError(FloatingPointError):
    """A training step produced NaN/inf gradients; parameters were left untouched."""


@runtime_checkable
class DenoiserModel(Protocol):
    def predict_eps(self, x_t: np.ndarray, t, sched: NoiseSchedule) -> np.ndarray:
        """Shape-preserving noise estimate; t is a 1-based level (int or per-row array)."""
        ...


# ---------------------------------------------------------------------------
# Gaussian-mixture prior and its exact noise posterior


@dataclass(frozen=True)
class GaussianMixturePrior:
    """Mixture of full-covariance Gaussians over R^d.

    `covariances` accepts (K, d, d) matrices or (K, d) diagonal vectors.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        k, d = mu.shape
        if cov.ndim == 2:  # diagonal form
            if cov.shape != (k, d):
                raise ValueError(f"diagonal covariances must be ({k}, {d}), got {cov.shape}")
            cov = np.stack([np.diag(row) for row in cov])
        if cov.shape != (k, d, d):
            raise ValueError(f"covariances must be ({k}, {d}, {d}), got {cov.shape}")
        if w.shape != (k,):
            raise ValueError(f"weights must have shape ({k},), got {w.shape}")
        if np.any(w < 0.0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-9")
        for i in range(k):
            if not np.allclose(cov[i], cov[i].T, rtol=0.0, atol=1e-12):
                raise ValueError(f"covariance {i} is not symmetric")
            if np.linalg.eigvalsh(cov[i])[0] <= 0.0:
                raise ValueError(f"covariance {i} is not positive definite")
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixturePrior":
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 1:
            cov = np.diag(cov)
        return cls(weights=np.array([1.0]), means=mean[None, :], covariances=cov[None, :, :])

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        chols = np.stack([np.linalg.cholesky(c) for c in self.covariances])
        return self.means[comp] + np.einsum("nij,nj->ni", chols[comp], z)

    def posterior_x0_mean(self, x_t: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
        """E[x_0 | x_t] at level t under this prior (t >= 1)."""
        ab = sched.alpha_bar(t)
        if ab >= 1.0:
            raise ValueError("posterior mean undefined at abar = 1 (t = 0)")
        x = np.asarray(x_t, dtype=np.float64)
        lead = x.shape[:-1]
        d = self.dim
        if x.shape[-1] != d:
            raise ValueError(f"last axis {x.shape[-1]} != prior dim {d}")
        flat = x.reshape(-1, d)
        sab = np.sqrt(ab)

        log_resp = np.empty((flat.shape[0], self.n_components))
        cond_means = np.empty((flat.shape[0], self.n_components, d))
        for k in range(self.n_components):
            marg_cov = ab * self.covariances[k] + (1.0 - ab) * np.eye(d)
            chol = np.linalg.cholesky(marg_cov)
            diff = flat - sab * self.means[k]
            # solve L y = diff^T for the Mahalanobis form and the regression
            y = np.linalg.solve(chol, diff.T)
            maha = np.sum(y * y, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            log_resp[:, k] = np.log(self.weights[k]) - 0.5 * (d * _LOG_2PI + logdet + maha)
            sol = np.linalg.solve(chol.T, y).T  # marg_cov^{-1} diff
            cond_means[:, k, :] = self.means[k] + sab * sol @ self.covariances[k].T

        log_resp -= logsumexp(log_resp, axis=1, keepdims=True)
        post = np.einsum("nk,nkd->nd", np.exp(log_resp), cond_means)
        return post.reshape(*lead, d)


def gm_predict_eps(prior: GaussianMixturePrior, x_t: np.ndarray, t: int,
                   sched: NoiseSchedule) -> np.ndarray:
    """Exact conditional expectation of the cumulative noise given x_t."""
    t = int(t)
    if t < 1:
        raise ValueError("noise posterior is undefined at t = 0 (abar = 1)")
    ab = sched.alpha_bar(t)
    x = np.asarray(x_t, dtype=np.float64)
    m = prior.posterior_x0_mean(x, t, sched)
    return (x - np.sqrt(ab) * m) / np.sqrt(1.0 - ab)


class GaussianMixtureDenoiser:
    """DenoiserModel adapter around the analytic mixture posterior."""

    def __init__(self, prior: GaussianMixturePrior):
        self.prior = prior

    def predict_eps(self, x_t: np.ndarray, t, sched: NoiseSchedule) -> np.ndarray:
        t_arr = np.asarray(t)
        if t_arr.ndim == 0:
            return gm_predict_eps(self.prior, x_t, int(t_arr), sched)
        x = np.asarray(x_t, dtype=np.float64)
        if t_arr.shape != x.shape[:-1]:
            raise ValueError(f"per-row t shape {t_arr.shape} != batch shape {x.shape[:-1]}")
        out = np.empty_like(x)
        for tv in np.unique(t_arr):
            sel = t_arr == tv
            out[sel] = gm_predict_eps(self.prior, x[sel], int(tv), sched)
        return out


# ---------------------------------------------------------------------------
# Trainable MLP denoiser

TIME_EMBED_BASE = 1000.0


def time_embedding(t, n_freqs: int = 8) -> np.ndarray:
    """[sin(w_k t), cos(w_k t)] features, w_k = BASE^(-k/(F-1)), schedule-agnostic."""
    t = np.asarray(t, dtype=np.float64)
    k = np.arange(n_freqs, dtype=np.float64)
    omega = TIME_EMBED_BASE ** (-k / max(n_freqs - 1, 1))
    angles = t[..., None] * omega
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


@dataclass
class MlpDenoiser:
    """tanh MLP over [x, time features]; weights W_i are (fan_out, fan_in)."""

    data_dim: int
    hidden_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    time_freqs: int = 8
    velocities: list[np.ndarray] = field(default_factory=list, repr=False)

    @classmethod
    def create(cls, data_dim: int, hidden_sizes: tuple[int, ...],
               rng: np.random.Generator, time_freqs: int = 8) -> "MlpDenoiser":
        sizes = (data_dim + 2 * time_freqs, *hidden_sizes, data_dim)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        return cls(data_dim=data_dim, hidden_sizes=tuple(hidden_sizes),
                   weights=weights, biases=biases, time_freqs=time_freqs)

    @property
    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def _features(self, x: np.ndarray, t) -> np.ndarray:
        emb = time_embedding(t, self.time_freqs)
        emb = np.broadcast_to(emb, x.shape[:-1] + (2 * self.time_freqs,))
        return np.concatenate([x, emb], axis=-1)

    def forward(self, x_t: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x_t, dtype=np.float64)
        if x.shape[-1] != self.data_dim:
            raise ValueError(f"last axis {x.shape[-1]} != data_dim {self.data_dim}")
        h = self._features(x, t)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w.T + b)
        return h @ self.weights[-1].T + self.biases[-1]

    def predict_eps(self, x_t: np.ndarray, t, sched: NoiseSchedule = None) -> np.ndarray:
        return self.forward(x_t, t)


def mlp_forward(model: MlpDenoiser, x_t: np.ndarray, t) -> np.ndarray:
    return model.forward(x_t, t)


def posterior_mean(eps_hat: np.ndarray, x_t: np.ndarray, t: int,
                   sched: NoiseSchedule) -> np.ndarray:
    """Reverse-step mean: (x_t - beta_t / sqrt(1-abar_t) * eps_hat) / sqrt(alpha_t)."""
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ValueError(f"eps_hat shape {eps_hat.shape} != x_t shape {x_t.shape}")
    b = sched.beta(t)
    a = sched.alpha(t)
    ab = sched.alpha_bar(t)
    return (x_t - b / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)


# ---------------------------------------------------------------------------
# Training objective


def _draw_batch_noise(x0: np.ndarray, sched: NoiseSchedule, rng: np.random.Generator):
    n = x0.shape[0]
    t = rng.integers(1, sched.steps + 1, size=n)
    eps = rng.standard_normal(x0.shape)
    return t, eps


def _noised(x0: np.ndarray, t: np.ndarray, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    ab = np.where(t == 0, 1.0, sched.alpha_bars[np.maximum(t, 1) - 1])
    ab = ab.reshape(t.shape + (1,) * (x0.ndim - t.ndim))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def loss_simple_fixed(model: DenoiserModel, x0_batch: np.ndarray, t: np.ndarray,
                      eps: np.ndarray, sched: NoiseSchedule) -> float:
    """Noise-prediction MSE for explicit (t, eps) draws: mean_i ||eps_i - pred_i||^2."""
    x_t = _noised(x0_batch, t, eps, sched)
    pred = model.predict_eps(x_t, t, sched)
    diff = eps - pred
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def loss_simple(model: DenoiserModel, x0_batch: np.ndarray, sched: NoiseSchedule,
                rng: np.random.Generator) -> float:
    """Monte-Carlo noise-prediction objective with t ~ Uniform{1..T} per row."""
    x0 = np.asarray(x0_batch, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[0] == 0:
        raise ValueError("x0_batch must be a nonempty (n, d) array")
    t, eps = _draw_batch_noise(x0, sched, rng)
    return loss_simple_fixed(model, x0, t, eps, sched)


def mlp_loss_and_grads(model: MlpDenoiser, x0_batch: np.ndarray, t: np.ndarray,
                       eps: np.ndarray, sched: NoiseSchedule):
    """Loss plus backpropagated gradients w.r.t. every weight and bias."""
    x_t = _noised(x0_batch, t, eps, sched)
    feats = model._features(x_t, t)

    acts = [feats]
    h = feats
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.tanh(h @ w.T + b)
        acts.append(h)
    out = h @ model.weights[-1].T + model.biases[-1]

    n = x0_batch.shape[0]
    diff = out - eps
    loss = float(np.mean(np.sum(diff * diff, axis=-1)))

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    delta = 2.0 * diff / n
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (1.0 - acts[i] * acts[i])
    return loss, grads_w, grads_b


def train_step(model: MlpDenoiser, x0_batch: np.ndarray, sched: NoiseSchedule,
               lr: float, rng: np.random.Generator, momentum: float = 0.0):
    """One SGD step on the noise-prediction MSE; returns (model, loss).

    The model is updated in place. Non-finite gradients abort the step with
    NonFiniteGradientError before any parameter is modified.
    """
    x0 = np.asarray(x0_batch, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[0] == 0:
        raise ValueError("x0_batch must be a nonempty (n, d) array")
    t, eps = _draw_batch_noise(x0, sched, rng)
    loss, grads_w, grads_b = mlp_loss_and_grads(model, x0, t, eps, sched)

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(
                f"non-finite gradient in parameter tensor {i} (loss={loss!r}); step aborted"
            )

    params = model.parameters
    if not model.velocities:
        model.velocities = [np.zeros_like(p) for p in params]
    for p, v, g in zip(params, model.velocities, grads):
        v *= momentum
        v -= lr * g
        p += v
    return model, loss


def two_moons(n: int, rng: np.random.Generator, noise: float = 0.08) -> np.ndarray:
    """Interleaved half-circle toy set in R^2, for training demos and tests."""
    angles = rng.uniform(0.0, np.pi, size=n)
    upper = rng.random(n) < 0.5
    x = np.where(upper, np.cos(angles), 1.0 - np.cos(angles))
    y = np.where(upper, np.sin(angles), 0.5 - np.sin(angles))
    pts = np.stack([x, y], axis=1)
    return pts + noise * rng.standard_normal(pts.shape)


# ---------------------------------------------------------------------------
# Checkpoints: magic, version, architecture, parameter tensors in order


def save_checkpoint(model: MlpDenoiser, path) -> None:
    """Versioned binary dump of architecture + parameters (not training state)."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", model.time_freqs))
        fh.write(struct.pack("<Q", model.data_dim))
        fh.write(struct.pack("<Q", len(model.hidden_sizes)))
        for h in model.hidden_sizes:
            fh.write(struct.pack("<Q", h))
        for p in model.parameters:
            write_tensor(fh, p)


def load_checkpoint(path) -> MlpDenoiser:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise TensorFormatError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise TensorFormatError(f"unsupported checkpoint version {version}")
        (time_freqs,) = struct.unpack("<I", fh.read(4))
        (data_dim,) = struct.unpack("<Q", fh.read(8))
        (n_hidden,) = struct.unpack("<Q", fh.read(8))
        hidden = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(n_hidden))

        sizes = (data_dim + 2 * time_freqs, *hidden, data_dim)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = read_tensor(fh)
            b = read_tensor(fh)
            if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise TensorFormatError(
                    f"parameter shape mismatch: got {w.shape}/{b.shape}, "
                    f"expected {(fan_out, fan_in)}/{(fan_out,)}"
                )
            weights.append(w)
            biases.append(b)
        if fh.read(1):
            raise TensorFormatError("trailing bytes after checkpoint data")
    return MlpDenoiser(data_dim=data_dim, hidden_sizes=hidden,
                       weights=weights, biases=biases, time_freqs=time_freqs)
