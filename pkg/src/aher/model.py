"""Policy/value MLP with exact analytic gradients and an Adam optimizer.

Architecture is fixed at three ReLU hidden layers (sizes configurable) with a
masked-softmax policy head and a tanh value head. Training applies inverted
dropout to hidden activations; inference never does, so self-play and
evaluation see deterministic outputs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels

NEG = kernels.NEG_INF


@dataclass
class NetParams:
    """Weights are (fan_in, fan_out); h3 feeds both heads."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    wp: np.ndarray
    bp: np.ndarray
    wv: np.ndarray
    bv: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3,
                self.wp, self.bp, self.wv, self.bv]

    @property
    def weight_matrices(self) -> list[np.ndarray]:
        return [self.w1, self.w2, self.w3, self.wp, self.wv]

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def action_count(self) -> int:
        return self.wp.shape[1]

    def copy(self) -> "NetParams":
        return NetParams(*[a.copy() for a in self.arrays()])


@dataclass
class TrainBatch:
    features: np.ndarray      # (B, F)
    policy_targets: np.ndarray  # (B, A), rows sum to 1 over their mask
    value_targets: np.ndarray   # (B,), in [-1, 1]
    masks: np.ndarray           # (B, A) boolean

    def __post_init__(self):
        b = self.features.shape[0]
        if not (self.policy_targets.shape[0] == self.value_targets.shape[0]
                == self.masks.shape[0] == b):
            raise ValueError("batch row counts differ")

    def __len__(self) -> int:
        return int(self.features.shape[0])


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(
    rng: np.random.Generator,
    feature_dim: int,
    action_count: int,
    hidden: Sequence[int] = (256, 256, 128),
    zero: bool = False,
) -> NetParams:
    """Glorot-uniform weights, zero biases. ``zero`` is a test hook that
    zeroes everything (uniform masked policy, value 0)."""
    if len(hidden) != 3:
        raise ValueError("architecture is fixed at three hidden layers")
    if min(feature_dim, action_count, *hidden) < 1:
        raise ValueError("layer sizes must be positive")
    h1, h2, h3 = hidden
    p = NetParams(
        w1=_glorot(rng, feature_dim, h1), b1=np.zeros(h1),
        w2=_glorot(rng, h1, h2), b2=np.zeros(h2),
        w3=_glorot(rng, h2, h3), b3=np.zeros(h3),
        wp=_glorot(rng, h3, action_count), bp=np.zeros(action_count),
        wv=_glorot(rng, h3, 1), bv=np.zeros(1),
    )
    if zero:
        for a in p.arrays():
            a[...] = 0.0
    return p


def masked_softmax_batch(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise softmax over legal entries with exact zeros elsewhere."""
    shifted = np.where(masks, logits, NEG)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(masks, np.exp(shifted), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def dropout_masks(
    rng: np.random.Generator, batch: int, hidden: Sequence[int], rate: float
) -> list[np.ndarray]:
    """Inverted-dropout multipliers (0 or 1/(1-rate)) for the hidden layers."""
    keep = 1.0 - rate
    return [
        (rng.random((batch, h)) < keep).astype(np.float64) / keep for h in hidden
    ]


def _forward_full(params: NetParams, x: np.ndarray, masks_drop):
    """Returns all intermediates needed by backprop."""
    z1 = x @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    d1 = a1 * masks_drop[0] if masks_drop is not None else a1
    z2 = d1 @ params.w2 + params.b2
    a2 = np.maximum(z2, 0.0)
    d2 = a2 * masks_drop[1] if masks_drop is not None else a2
    z3 = d2 @ params.w3 + params.b3
    a3 = np.maximum(z3, 0.0)
    d3 = a3 * masks_drop[2] if masks_drop is not None else a3
    return z1, d1, z2, d2, z3, d3


def forward(
    params: NetParams,
    features: np.ndarray,
    masks: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
    drop_masks: Optional[list] = None,
    dropout_rate: float = 0.3,
):
    """Batch forward pass -> (policy (B, A), value (B,)).

    ``train_mode`` applies dropout, drawing masks from ``rng`` unless
    explicit ``drop_masks`` are given.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    masks = np.atleast_2d(masks)
    if features.shape[1] != params.feature_dim:
        raise ValueError(
            f"feature dim {features.shape[1]} != network input {params.feature_dim}"
        )
    if train_mode and drop_masks is None:
        if rng is None:
            raise ValueError("train_mode forward needs an rng or explicit masks")
        hidden = [params.b1.size, params.b2.size, params.b3.size]
        drop_masks = dropout_masks(rng, features.shape[0], hidden, dropout_rate)
    if not train_mode:
        drop_masks = None
    _, _, _, _, _, d3 = _forward_full(params, features, drop_masks)
    logits = d3 @ params.wp + params.bp
    policy = masked_softmax_batch(logits, masks)
    value = np.tanh(d3 @ params.wv + params.bv)[:, 0]
    return policy, value


def make_evaluator(params: NetParams):
    """Single-observation inference closure for tree search (no dropout).

    Uses the active kernel backend; safe for concurrent read-only use.
    """

    def evaluate(x: np.ndarray, legal: np.ndarray):
        if x.shape[0] != params.feature_dim:
            raise ValueError(
                f"feature dim {x.shape[0]} != network input {params.feature_dim}"
            )
        return kernels.forward_policy_value(
            params.w1, params.b1, params.w2, params.b2, params.w3, params.b3,
            params.wp, params.bp, params.wv, params.bv, x, legal,
        )

    return evaluate


def _validate_batch(batch: TrainBatch):
    if len(batch) == 0:
        raise ValueError("empty batch")
    if np.any(batch.policy_targets[~batch.masks] > 0):
        raise ValueError("policy target assigns probability to an illegal action")
    sums = batch.policy_targets.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-6):
        raise ValueError("policy target rows must sum to 1")


def loss(
    params: NetParams,
    batch: TrainBatch,
    drop_masks: Optional[list] = None,
    l2: float = 1e-4,
) -> float:
    """Mean squared value error plus policy cross-entropy plus L2 on weights."""
    _validate_batch(batch)
    _, _, _, _, _, d3 = _forward_full(params, batch.features, drop_masks)
    logits = d3 @ params.wp + params.bp
    shifted = np.where(batch.masks, logits, NEG)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(batch.masks, np.exp(shifted), 0.0)
    log_z = np.log(e.sum(axis=1, keepdims=True))
    log_pi = shifted - log_z
    y = batch.policy_targets
    ce = -np.sum(np.where(y > 0, y * log_pi, 0.0), axis=1)
    value = np.tanh(d3 @ params.wv + params.bv)[:, 0]
    sq = (value - batch.value_targets) ** 2
    reg = l2 * sum(float(np.sum(w * w)) for w in params.weight_matrices)
    return float(np.mean(sq + ce) + reg)


def grad(
    params: NetParams,
    batch: TrainBatch,
    rng: Optional[np.random.Generator] = None,
    drop_masks: Optional[list] = None,
    l2: float = 1e-4,
    dropout_rate: float = 0.3,
) -> NetParams:
    """Exact analytic gradients of ``loss``.

    When ``rng`` is given (and no explicit masks), one set of dropout masks
    is drawn and used for the whole call, so finite differences against
    ``loss`` with the same masks are well posed.
    """
    _validate_batch(batch)
    x = batch.features
    b = x.shape[0]
    if drop_masks is None and rng is not None:
        hidden = [params.b1.size, params.b2.size, params.b3.size]
        drop_masks = dropout_masks(rng, b, hidden, dropout_rate)

    z1, d1, z2, d2, z3, d3 = _forward_full(params, x, drop_masks)
    logits = d3 @ params.wp + params.bp
    pi = masked_softmax_batch(logits, batch.masks)
    value = np.tanh(d3 @ params.wv + params.bv)[:, 0]

    d_logits = (pi - batch.policy_targets) / b
    d_s = (2.0 * (value - batch.value_targets) * (1.0 - value**2) / b)[:, None]

    g_wp = d3.T @ d_logits + 2.0 * l2 * params.wp
    g_bp = d_logits.sum(axis=0)
    g_wv = d3.T @ d_s + 2.0 * l2 * params.wv
    g_bv = d_s.sum(axis=0)

    d_d3 = d_logits @ params.wp.T + d_s @ params.wv.T
    if drop_masks is not None:
        d_d3 = d_d3 * drop_masks[2]
    d_z3 = d_d3 * (z3 > 0)
    g_w3 = d2.T @ d_z3 + 2.0 * l2 * params.w3
    g_b3 = d_z3.sum(axis=0)

    d_d2 = d_z3 @ params.w3.T
    if drop_masks is not None:
        d_d2 = d_d2 * drop_masks[1]
    d_z2 = d_d2 * (z2 > 0)
    g_w2 = d1.T @ d_z2 + 2.0 * l2 * params.w2
    g_b2 = d_z2.sum(axis=0)

    d_d1 = d_z2 @ params.w2.T
    if drop_masks is not None:
        d_d1 = d_d1 * drop_masks[0]
    d_z1 = d_d1 * (z1 > 0)
    g_w1 = x.T @ d_z1 + 2.0 * l2 * params.w1
    g_b1 = d_z1.sum(axis=0)

    return NetParams(g_w1, g_b1, g_w2, g_b2, g_w3, g_b3, g_wp, g_bp, g_wv, g_bv)


@dataclass
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: NetParams
    v: NetParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params: NetParams) -> "AdamState":
        zero = lambda: NetParams(*[np.zeros_like(a) for a in params.arrays()])
        return cls(m=zero(), v=zero(), t=0)


def optimizer_step(
    params: NetParams,
    grads: NetParams,
    state: AdamState,
    hyper: AdamHyper = AdamHyper(),
) -> tuple[NetParams, AdamState]:
    """Bias-corrected adaptive-moment update (in place on ``params``)."""
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient entries; halting training")
    state.t += 1
    for p, g, m, v in zip(params.arrays(), grads.arrays(),
                          state.m.arrays(), state.v.arrays()):
        kernels.adam_update(
            p.ravel(), np.ascontiguousarray(g, dtype=np.float64).ravel(),
            m.ravel(), v.ravel(),
            state.t, hyper.lr, hyper.beta1, hyper.beta2, hyper.eps,
        )
    return params, state


def save_checkpoint(path, params: NetParams, opt_state: Optional[AdamState] = None):
    """Versioned npz dump; loading reproduces bit-identical inference."""
    meta = {
        "format": 1,
        "hidden": [int(params.b1.size), int(params.b2.size), int(params.b3.size)],
        "feature_dim": int(params.feature_dim),
        "action_count": int(params.action_count),
        "opt_t": int(opt_state.t) if opt_state is not None else -1,
    }
    names = ["w1", "b1", "w2", "b2", "w3", "b3", "wp", "bp", "wv", "bv"]
    payload = {f"p_{n}": a for n, a in zip(names, params.arrays())}
    if opt_state is not None:
        payload.update({f"m_{n}": a for n, a in zip(names, opt_state.m.arrays())})
        payload.update({f"v_{n}": a for n, a in zip(names, opt_state.v.arrays())})
    payload["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[NetParams, Optional[AdamState]]:
    with np.load(path) as f:
        meta = json.loads(bytes(f["meta"]).decode())
        if meta.get("format") != 1:
            raise ValueError(f"unsupported checkpoint format: {meta.get('format')}")
        names = ["w1", "b1", "w2", "b2", "w3", "b3", "wp", "bp", "wv", "bv"]
        params = NetParams(*[f[f"p_{n}"] for n in names])
        opt_state = None
        if meta["opt_t"] >= 0:
            opt_state = AdamState(
                m=NetParams(*[f[f"m_{n}"] for n in names]),
                v=NetParams(*[f[f"v_{n}"] for n in names]),
                t=meta["opt_t"],
            )
    return params, opt_state
