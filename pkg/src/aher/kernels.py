"""Hot numeric kernels: single-observation MLP inference, PUCT scoring, Adam.

Each kernel exists twice: a pure-numpy reference implementation and (when
available) a numba-compiled version of the same source. The active backend is
chosen at import time from the ``AHER_NUMBA`` environment variable ("0"
disables JIT; anything else, or unset, enables it when numba imports cleanly).
``benchmarks/bench_kernels.py`` times one against the other.

Both backends compute the same quantities; bit-level results may differ
because BLAS and the JIT loop accumulate in different orders. Tests compare
them to 1e-12 relative tolerance.
"""

from __future__ import annotations

import os

import numpy as np

NEG_INF = -1e30  # stand-in for -inf in logit masking; exp() underflows to 0


def _forward_policy_value(w1, b1, w2, b2, w3, b3, wp, bp, wv, bv, x, legal):
    """Three ReLU hidden layers, masked-softmax policy head, tanh value head.

    Weight matrices are (fan_in, fan_out). Inference path only (no dropout).
    ``legal`` is a boolean mask; illegal actions receive probability exactly 0.
    """
    h1 = np.maximum(np.dot(x, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    h3 = np.maximum(np.dot(h2, w3) + b3, 0.0)
    logits = np.dot(h3, wp) + bp
    n = logits.shape[0]
    m = NEG_INF
    for i in range(n):
        if legal[i] and logits[i] > m:
            m = logits[i]
    probs = np.zeros(n)
    z = 0.0
    for i in range(n):
        if legal[i]:
            e = np.exp(logits[i] - m)
            probs[i] = e
            z += e
    for i in range(n):
        probs[i] /= z
    value = np.tanh(np.dot(h3, wv) + bv)[0]
    return probs, value


def _masked_softmax(logits, legal):
    """Softmax over legal entries, exact zeros elsewhere."""
    n = logits.shape[0]
    m = NEG_INF
    for i in range(n):
        if legal[i] and logits[i] > m:
            m = logits[i]
    out = np.zeros(n)
    z = 0.0
    for i in range(n):
        if legal[i]:
            e = np.exp(logits[i] - m)
            out[i] = e
            z += e
    for i in range(n):
        out[i] /= z
    return out


def _puct_select(priors, counts, totals, parent_visits, c_puct, legal):
    """argmax over legal a of Q(a) + c_puct * P(a) * sqrt(N) / (1 + n(a)).

    Q(a) = W(a)/n(a), defined as 0 for unvisited actions. Ties break toward
    the lowest action index (strict > comparison keeps the first maximum).
    """
    sqrt_n = np.sqrt(parent_visits)
    best = -1
    best_score = -np.inf
    for a in range(priors.shape[0]):
        if not legal[a]:
            continue
        n_a = counts[a]
        q = totals[a] / n_a if n_a > 0 else 0.0
        score = q + c_puct * priors[a] * sqrt_n / (1.0 + n_a)
        if score > best_score:
            best_score = score
            best = a
    return best


def _adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """In-place bias-corrected adaptive-moment step on flat views."""
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(param.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        param[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


def _numba_enabled() -> bool:
    flag = os.environ.get("AHER_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_enabled()

# Reference (pure numpy) bindings are always importable for tests and for the
# fallback path.
forward_policy_value_np = _forward_policy_value
masked_softmax_np = _masked_softmax
puct_select_np = _puct_select
adam_update_np = _adam_update

if NUMBA_ENABLED:
    from numba import njit

    forward_policy_value = njit(cache=True)(_forward_policy_value)
    masked_softmax = njit(cache=True)(_masked_softmax)
    puct_select = njit(cache=True)(_puct_select)
    adam_update = njit(cache=True)(_adam_update)
else:
    forward_policy_value = _forward_policy_value
    masked_softmax = _masked_softmax
    puct_select = _puct_select
    adam_update = _adam_update


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
