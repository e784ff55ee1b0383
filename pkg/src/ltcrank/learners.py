"""Binary pairwise comparators: logistic regression and a small MLP.

Both models map a comparison feature vector to the probability that the
left model of the pair wins, and both are trained on binary cross-entropy.
The logistic model is fitted with a damped Newton solver (deterministic,
no randomness); the MLP with mini-batch Adam and a seeded shuffle, so
identical inputs and config reproduce identical parameters bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DegenerateFitError
from .pairing import FeatureVector

PROB_EPS = 1e-12  # clamp for probabilities entering a log

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MLP_HIDDEN = (32, 32)
MLP_BATCH_CAP = 200

SERIAL_VERSION = 1


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(probabilities, labels) -> float:
    """Mean binary cross-entropy, with probabilities clamped to
    [PROB_EPS, 1 - PROB_EPS] so the result stays finite."""
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.size == 0:
        raise ValueError("bce_loss needs at least one sample")
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _bce_from_logits(z, y) -> float:
    # softplus(z) - y*z, computed stably; equals bce_loss(sigmoid(z), y)
    z = np.asarray(z, dtype=float)
    return float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))))


@dataclass(frozen=True)
class TrainConfig:
    """Shared training knobs for both comparator families.

    `optimizer` is informational: "newton" for the logistic solver,
    "adam" for the MLP, or "auto" to let each fitter pick its own.
    `tolerance` stops the Newton solver on gradient norm; the MLP always
    runs the full `max_iter` epochs. `learning_rate` is the Adam step.
    """

    max_iter: int = 100
    seed: int = 0
    optimizer: str = "auto"
    tolerance: float = 1e-6
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("auto", "newton", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class LogisticModel:
    """w, b with L2 strength C: objective = sum BCE + ||w||^2 / (2C),
    intercept unpenalized (same convention as the usual C parameter)."""

    weights: np.ndarray
    bias: float
    l2_strength: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict_proba_many(self, X) -> np.ndarray:
        return sigmoid(self.decision(X))

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "ltcrank-logistic",
                "version": SERIAL_VERSION,
                "weights": self.weights.tolist(),
                "bias": self.bias,
                "l2_strength": self.l2_strength,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        doc = json.loads(text)
        if doc.get("format") != "ltcrank-logistic":
            raise ValueError("not a serialized logistic model")
        return cls(
            weights=np.array(doc["weights"], dtype=float),
            bias=float(doc["bias"]),
            l2_strength=float(doc["l2_strength"]),
        )


@dataclass(frozen=True)
class MlpModel:
    """Fully connected net, ReLU hidden layers, sigmoid output."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    seed: int = 0
    loss_curve: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        for a in (*ws, *bs):
            a.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def decision(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=float)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1]).ravel()

    def predict_proba_many(self, X) -> np.ndarray:
        return sigmoid(self.decision(X))

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "ltcrank-mlp",
                "version": SERIAL_VERSION,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        doc = json.loads(text)
        if doc.get("format") != "ltcrank-mlp":
            raise ValueError("not a serialized MLP model")
        return cls(
            weights=tuple(np.array(w, dtype=float) for w in doc["weights"]),
            biases=tuple(np.array(b, dtype=float) for b in doc["biases"]),
            seed=int(doc["seed"]),
        )


def predict_proba(model, x) -> float:
    """Win probability for a single feature vector, from either model."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
    return float(model.predict_proba_many(values.reshape(1, -1))[0])


def _check_training_inputs(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"bad training shapes: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise DegenerateFitError("need at least 2 training samples")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    if classes.size < 2:
        raise DegenerateFitError("training labels contain a single class")
    return X, y


def _logistic_value_grad(params, X, y, l2_c):
    """Mean-scaled objective and gradient at params = [w, b].

    J = mean BCE + ||w||^2 / (2 C n); same minimizer as the sum-form
    objective sum BCE + ||w||^2 / (2 C).
    """
    n = X.shape[0]
    w, b = params[:-1], params[-1]
    z = X @ w + b
    p = sigmoid(z)
    value = _bce_from_logits(z, y) + float(w @ w) / (2.0 * l2_c * n)
    r = (p - y) / n
    grad = np.concatenate([X.T @ r + w / (l2_c * n), [r.sum()]])
    return value, grad


def fit_logistic(X, y, cfg: TrainConfig | None = None, l2_c: float = 1.0) -> LogisticModel:
    """Fit the L2-regularized logistic comparator with damped Newton.

    Iterates from zero until the objective gradient norm drops below
    cfg.tolerance or cfg.max_iter iterations, backtracking the Newton step
    until it decreases the objective. Deterministic for fixed inputs.
    """
    cfg = cfg or TrainConfig()
    if cfg.optimizer not in ("auto", "newton"):
        raise ValueError("fit_logistic uses the newton solver")
    if l2_c <= 0:
        raise ValueError("l2_c must be positive")
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    params = np.zeros(d + 1)
    value, grad = _logistic_value_grad(params, X, y, l2_c)
    for _ in range(cfg.max_iter):
        if np.linalg.norm(grad) <= cfg.tolerance:
            break
        w = params[:-1]
        p = sigmoid(X @ w + params[-1])
        curvature = p * (1.0 - p)
        hessian = np.empty((d + 1, d + 1))
        xc = X * curvature[:, None]
        hessian[:d, :d] = (X.T @ xc) / n + np.eye(d) / (l2_c * n)
        hessian[:d, d] = hessian[d, :d] = xc.sum(axis=0) / n
        hessian[d, d] = curvature.sum() / n
        hessian[np.diag_indices_from(hessian)] += 1e-12  # floor for near-singular fits
        step = np.linalg.solve(hessian, grad)
        # Armijo backtracking on the Newton direction
        t = 1.0
        descent = float(grad @ step)
        for _ in range(60):
            candidate = params - t * step
            cand_value, cand_grad = _logistic_value_grad(candidate, X, y, l2_c)
            if cand_value <= value - 1e-4 * t * descent:
                break
            t *= 0.5
        else:
            break  # no step improves the objective at float precision
        params, value, grad = candidate, cand_value, cand_grad
    return LogisticModel(weights=params[:-1], bias=float(params[-1]), l2_strength=l2_c)


def _glorot_init(rng: np.random.Generator, sizes):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return weights, biases


def _mlp_forward(weights, biases, X):
    """Returns hidden activations (post-ReLU) and output logits."""
    activations = [X]
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        activations.append(h)
    logits = (h @ weights[-1] + biases[-1]).ravel()
    return activations, logits


def _mlp_value_grad(weights, biases, X, y):
    """Mean BCE and its gradients w.r.t. every weight and bias."""
    n = X.shape[0]
    activations, logits = _mlp_forward(weights, biases, X)
    value = _bce_from_logits(logits, y)
    delta = ((sigmoid(logits) - y) / n)[:, None]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0)
    return value, grads_w, grads_b


def fit_mlp(X, y, cfg: TrainConfig | None = None) -> MlpModel:
    """Fit the two-hidden-layer (32, 32) ReLU comparator with Adam.

    Runs exactly cfg.max_iter epochs of mini-batch updates (batch size
    min(200, n), reshuffled each epoch from cfg.seed); no early stopping.
    Weights and biases start uniform in +-sqrt(6 / (fan_in + fan_out)).
    With max_iter=0 the initialized, untrained net is returned.
    The full-data training loss after each epoch is kept in `loss_curve`.
    """
    cfg = cfg or TrainConfig()
    if cfg.optimizer not in ("auto", "adam"):
        raise ValueError("fit_mlp uses the adam optimizer")
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    weights, biases = _glorot_init(rng, (d, *MLP_HIDDEN, 1))
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    batch = min(MLP_BATCH_CAP, n)
    step_count = 0
    curve = []
    for _ in range(cfg.max_iter):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            _, grads_w, grads_b = _mlp_value_grad(weights, biases, X[idx], y[idx])
            step_count += 1
            scale = (
                cfg.learning_rate
                * np.sqrt(1.0 - ADAM_BETA2**step_count)
                / (1.0 - ADAM_BETA1**step_count)
            )
            for i in range(len(weights)):
                m_w[i] = ADAM_BETA1 * m_w[i] + (1 - ADAM_BETA1) * grads_w[i]
                v_w[i] = ADAM_BETA2 * v_w[i] + (1 - ADAM_BETA2) * grads_w[i] ** 2
                weights[i] = weights[i] - scale * m_w[i] / (np.sqrt(v_w[i]) + ADAM_EPS)
                m_b[i] = ADAM_BETA1 * m_b[i] + (1 - ADAM_BETA1) * grads_b[i]
                v_b[i] = ADAM_BETA2 * v_b[i] + (1 - ADAM_BETA2) * grads_b[i] ** 2
                biases[i] = biases[i] - scale * m_b[i] / (np.sqrt(v_b[i]) + ADAM_EPS)
        _, logits = _mlp_forward(weights, biases, X)
        curve.append(_bce_from_logits(logits, y))
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        seed=cfg.seed,
        loss_curve=tuple(curve),
    )


def save_model(model, path) -> None:
    Path(path).write_text(model.to_json(), encoding="utf-8")


def load_model(path):
    text = Path(path).read_text(encoding="utf-8")
    fmt = json.loads(text).get("format", "")
    if fmt == "ltcrank-logistic":
        return LogisticModel.from_json(text)
    if fmt == "ltcrank-mlp":
        return MlpModel.from_json(text)
    raise ValueError(f"unknown model format {fmt!r}")
