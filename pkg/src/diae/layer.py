"""Single-layer discriminative autoencoder trained by alternating least squares.

A layer maps data ``X`` (features x samples) to a lower-dimensional code via
an encoder matrix, with a decoder reconstructing the data and a linear class
map sending codes to one-hot labels.  Training splits the code out as a proxy
variable so that every update is a dense least-squares solve, couples proxy
and encoder through a quadratic penalty with a Bregman correction variable,
and sweeps the four block updates until the objective stalls or the
iteration budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .activations import Activation, resolve_activation
from .least_squares import LeastSquaresError, solve_left, solve_right, vstack
from .validation import DimensionMismatchError, as_matrix, check_same_cols

__all__ = [
    "LayerWeights",
    "TraceRow",
    "AdmmState",
    "TrainConfig",
    "TrainingError",
    "reconstruction_objective",
    "supervised_objective",
    "augmented_objective",
    "solve_decoder",
    "solve_class_map",
    "solve_encoder",
    "solve_code",
    "update_bregman",
    "initialize_encoder",
    "encode",
    "train_layer",
]

BREGMAN_RULES = ("paper", "standard")


class TrainingError(RuntimeError):
    """Raised when a block solve fails during training."""


@dataclass(frozen=True)
class LayerWeights:
    """Trained parameters of one layer.

    ``encoder`` is (hidden x features), ``decoder`` (features x hidden) and
    ``class_map`` (classes x hidden).  Trained layers always reduce the
    dimension (hidden < features); the constructor itself only enforces
    shape consistency and finiteness so that the block solvers can be
    exercised on square toy instances.
    """

    encoder: np.ndarray
    decoder: np.ndarray
    class_map: np.ndarray
    activation: Activation = Activation()

    def __post_init__(self):
        enc = as_matrix(self.encoder, "encoder")
        dec = as_matrix(self.decoder, "decoder")
        cmap = as_matrix(self.class_map, "class_map")
        h, m = enc.shape
        if dec.shape != (m, h):
            raise DimensionMismatchError(
                f"decoder shape {dec.shape} does not match encoder shape {enc.shape}"
            )
        if cmap.shape[1] != h:
            raise DimensionMismatchError(
                f"class_map has {cmap.shape[1]} columns, expected {h}"
            )
        object.__setattr__(self, "encoder", enc)
        object.__setattr__(self, "decoder", dec)
        object.__setattr__(self, "class_map", cmap)

    @property
    def n_features(self) -> int:
        return self.encoder.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.encoder.shape[0]

    @property
    def n_classes(self) -> int:
        return self.class_map.shape[0]


@dataclass(frozen=True)
class TraceRow:
    """Loss breakdown recorded at the end of one iteration.

    ``objective == recon_loss + lam * disc_loss + mu * constraint_residual**2``
    by construction (``constraint_residual`` is the Frobenius norm, not its
    square).
    """

    iteration: int
    recon_loss: float
    disc_loss: float
    constraint_residual: float
    objective: float


@dataclass
class AdmmState:
    """In-training variables of one layer plus its loss trace.

    ``sweep_objectives`` holds one ``(before, after)`` pair per iteration:
    the augmented objective evaluated just before and just after the four
    block updates, both under the Bregman variable in effect during that
    sweep.  It exists so descent across a sweep can be checked without
    re-running the updates.
    """

    code: np.ndarray
    bregman: np.ndarray
    n_iter: int
    trace: list[TraceRow] = field(default_factory=list)
    sweep_objectives: list[tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one layer.

    ``lam`` weights the label-consistency term (0 gives the plain
    unsupervised autoencoder), ``mu`` the proxy-coupling penalty.  ``tol``
    is the relative objective change between successive iterations below
    which training stops early.
    """

    lam: float = 10.0
    mu: float = 1.0
    max_iter: int = 20
    tol: float = 1e-4
    damping: float = 1e-6
    seed: int = 0
    bregman_rule: str = "paper"
    activation: str = "identity"
    clamp: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.bregman_rule not in BREGMAN_RULES:
            raise ValueError(
                f"unknown bregman_rule {self.bregman_rule!r}; expected one of {BREGMAN_RULES}"
            )
        resolve_activation(self.activation, self.clamp)  # validate eagerly

    def resolved_activation(self) -> Activation:
        return resolve_activation(self.activation, self.clamp)


# ---------------------------------------------------------------------------
# Objectives


def reconstruction_objective(data, weights: LayerWeights) -> float:
    """``||X - decoder @ phi(encoder @ X)||_F^2``."""
    X = as_matrix(data, "data")
    if weights.n_features != X.shape[0]:
        raise DimensionMismatchError(
            f"data has {X.shape[0]} rows but weights expect {weights.n_features}"
        )
    code = weights.activation.apply(weights.encoder @ X)
    resid = X - weights.decoder @ code
    return float(np.sum(resid * resid))


def supervised_objective(data, labels, weights: LayerWeights, lam: float) -> float:
    """Reconstruction plus ``lam`` times the label-consistency penalty."""
    X = as_matrix(data, "data")
    L = as_matrix(labels, "labels")
    check_same_cols(X, L, "data", "labels")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    code = weights.activation.apply(weights.encoder @ X)
    recon = X - weights.decoder @ code
    disc = L - weights.class_map @ code
    return float(np.sum(recon * recon) + lam * np.sum(disc * disc))


def _augmented_terms(X, L, weights: LayerWeights, code, bregman):
    recon = X - weights.decoder @ code
    disc = L - weights.class_map @ code
    gap = code - weights.activation.apply(weights.encoder @ X) - bregman
    return (
        float(np.sum(recon * recon)),
        float(np.sum(disc * disc)),
        float(np.sqrt(np.sum(gap * gap))),
    )


def augmented_objective(data, labels, weights: LayerWeights, code, bregman,
                        lam: float, mu: float) -> float:
    """Proxy-relaxed objective with the Bregman-corrected coupling term."""
    X = as_matrix(data, "data")
    L = as_matrix(labels, "labels")
    Z = as_matrix(code, "code")
    B = as_matrix(bregman, "bregman")
    check_same_cols(X, L, "data", "labels")
    check_same_cols(X, Z, "data", "code")
    if Z.shape != B.shape:
        raise DimensionMismatchError(
            f"code shape {Z.shape} does not match bregman shape {B.shape}"
        )
    if lam < 0 or mu < 0:
        raise ValueError("lam and mu must be non-negative")
    recon, disc, gap = _augmented_terms(X, L, weights, Z, B)
    return recon + lam * disc + mu * gap * gap


# ---------------------------------------------------------------------------
# Block updates


def solve_decoder(data, code, damping: float = 0.0) -> np.ndarray:
    """Exact minimizer of the (damped) reconstruction term over the decoder."""
    return solve_right(data, code, damping)


def solve_class_map(labels, code, damping: float = 0.0) -> np.ndarray:
    """Exact minimizer of the (damped) label-consistency term over the class map."""
    return solve_right(labels, code, damping)


def solve_encoder(code, bregman, data, activation: Activation,
                  damping: float = 0.0) -> np.ndarray:
    """Exact minimizer of ``||phi_inv(code - bregman) - encoder @ X||_F^2``.

    For tanh activations the pre-image is clamped into the open domain of
    the inverse before the solve.
    """
    Z = as_matrix(code, "code")
    B = as_matrix(bregman, "bregman")
    if Z.shape != B.shape:
        raise DimensionMismatchError(
            f"code shape {Z.shape} does not match bregman shape {B.shape}"
        )
    target = activation.invert(Z - B)
    return solve_right(target, data, damping)


def solve_code(data, labels, bregman, weights: LayerWeights,
               lam: float, mu: float, damping: float = 0.0) -> np.ndarray:
    """Exact minimizer of the full augmented objective over the code.

    The three quadratic terms are stacked into a single least-squares
    problem: design ``[decoder; sqrt(lam) * class_map; sqrt(mu) * I]``
    against target ``[X; sqrt(lam) * L; sqrt(mu) * (phi(encoder @ X) + B)]``.
    """
    X = as_matrix(data, "data")
    L = as_matrix(labels, "labels")
    B = as_matrix(bregman, "bregman")
    check_same_cols(X, L, "data", "labels")
    check_same_cols(X, B, "data", "bregman")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if mu <= 0:
        raise ValueError("mu must be positive")
    h = weights.n_hidden
    sl = np.sqrt(lam)
    sm = np.sqrt(mu)
    target = vstack([X, sl * L, sm * (weights.activation.apply(weights.encoder @ X) + B)])
    design = vstack([weights.decoder, sl * weights.class_map, sm * np.eye(h)])
    return solve_left(target, design, damping)


def update_bregman(code, encoder, data, bregman, activation: Activation,
                   rule: str = "paper") -> np.ndarray:
    """Update the coupling-correction variable.

    ``paper`` applies the reflected form ``B' = Z - phi(encoder @ X) - B``;
    ``standard`` the conventional split-Bregman accumulation
    ``B' = B + phi(encoder @ X) - Z``.
    """
    if rule not in BREGMAN_RULES:
        raise ValueError(f"unknown bregman rule {rule!r}; expected one of {BREGMAN_RULES}")
    Z = as_matrix(code, "code")
    B = as_matrix(bregman, "bregman")
    X = as_matrix(data, "data")
    enc = as_matrix(encoder, "encoder")
    if Z.shape != B.shape:
        raise DimensionMismatchError(
            f"code shape {Z.shape} does not match bregman shape {B.shape}"
        )
    phi = activation.apply(enc @ X)
    if phi.shape != Z.shape:
        raise DimensionMismatchError(
            f"encoded data has shape {phi.shape}, expected {Z.shape}"
        )
    if rule == "paper":
        return Z - phi - B
    return B + phi - Z


# ---------------------------------------------------------------------------
# Training loop


def initialize_encoder(n_hidden: int, n_features: int, seed: int) -> np.ndarray:
    """Symmetric uniform init, range ``sqrt(6 / (n_features + n_hidden))``."""
    r = np.sqrt(6.0 / (n_features + n_hidden))
    rng = np.random.default_rng(seed)
    return rng.uniform(-r, r, size=(n_hidden, n_features))


def encode(weights: LayerWeights, data) -> np.ndarray:
    """Deterministic layer output ``phi(encoder @ X)`` for m x N input."""
    X = as_matrix(data, "data", allow_empty_cols=True)
    if X.shape[0] != weights.n_features:
        raise DimensionMismatchError(
            f"data has {X.shape[0]} rows but layer expects {weights.n_features}"
        )
    return weights.activation.apply(weights.encoder @ X)


def _check_one_hot(L: np.ndarray) -> None:
    if not np.all((L == 0.0) | (L == 1.0)):
        raise ValueError("labels must be a one-hot matrix of 0/1 entries")
    sums = L.sum(axis=0)
    if not np.all(sums == 1.0):
        raise ValueError("each label column must contain exactly one 1")


_SOLVE_NAMES = ("decoder", "class-map", "encoder", "code")


def train_layer(data, labels, n_hidden: int,
                config: TrainConfig = TrainConfig()) -> tuple[LayerWeights, AdmmState]:
    """Train one layer on data ``X`` (features x samples) and one-hot labels.

    Returns the weights of the final iteration together with the training
    state (proxy code, Bregman variable, per-iteration trace).  Stops after
    ``config.max_iter`` sweeps or as soon as the relative objective change
    between successive iterations drops below ``config.tol``.
    """
    X = as_matrix(data, "data")
    L = as_matrix(labels, "labels")
    check_same_cols(X, L, "data", "labels")
    _check_one_hot(L)
    m, N = X.shape
    if N < 2:
        raise ValueError("training requires at least 2 samples")
    if not (1 <= n_hidden < m):
        raise ValueError(
            f"n_hidden must satisfy 1 <= n_hidden < n_features ({m}), got {n_hidden}"
        )

    act = config.resolved_activation()
    lam, mu, damping = config.lam, config.mu, config.damping

    encoder = initialize_encoder(n_hidden, m, config.seed)
    decoder = np.zeros((m, n_hidden))
    class_map = np.zeros((L.shape[0], n_hidden))
    code = act.apply(encoder @ X)
    bregman = np.zeros_like(code)

    weights = LayerWeights(encoder, decoder, class_map, act)
    trace: list[TraceRow] = []
    sweeps: list[tuple[float, float]] = []

    def objective(w: LayerWeights, z: np.ndarray, b: np.ndarray) -> float:
        recon, disc, gap = _augmented_terms(X, L, w, z, b)
        return recon + lam * disc + mu * gap * gap

    for it in range(1, config.max_iter + 1):
        before = objective(weights, code, bregman)
        step = ""
        try:
            step = _SOLVE_NAMES[0]
            decoder = solve_decoder(X, code, damping)
            step = _SOLVE_NAMES[1]
            class_map = solve_class_map(L, code, damping)
            step = _SOLVE_NAMES[2]
            encoder = solve_encoder(code, bregman, X, act, damping)
            weights = LayerWeights(encoder, decoder, class_map, act)
            step = _SOLVE_NAMES[3]
            code = solve_code(X, L, bregman, weights, lam, mu, damping)
        except LeastSquaresError as exc:
            raise TrainingError(
                f"{step} solve failed at iteration {it}: {exc}"
            ) from exc
        after = objective(weights, code, bregman)
        sweeps.append((before, after))

        bregman = update_bregman(code, encoder, X, bregman, act, config.bregman_rule)

        recon, disc, gap = _augmented_terms(X, L, weights, code, bregman)
        obj = recon + lam * disc + mu * gap * gap
        trace.append(TraceRow(it, recon, disc, gap, obj))

        if len(trace) >= 2:
            prev = trace[-2].objective
            if abs(obj - prev) / max(prev, 1e-12) < config.tol:
                break

    state = AdmmState(code=code, bregman=bregman, n_iter=len(trace),
                      trace=trace, sweep_objectives=sweeps)
    return weights, state


def layer_config_for(config: TrainConfig, layer_index: int) -> TrainConfig:
    """Per-layer config derived from a base config (seed offset by depth)."""
    return replace(config, seed=config.seed + layer_index)
