import numpy as np
import pytest

from emoseq import tensor as T
from emoseq.corpus import encode_pairs, synth_corpus
from emoseq.vocab import Vocabulary, build_vocab


def numeric_grad(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over every entry."""
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2.0 * h)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Elementwise |a-n| / max(|a|, |n|, 1); relative for O(1)+ gradients,
    absolute below that."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1.0)
    return float(np.max(np.abs(a - n) / denom))


def check_grads(loss_fn, params, tol, h=1e-5):
    """Compare tape gradients of loss_fn() against central differences for
    every entry of every parameter. loss_fn must be deterministic."""
    with T.Tape():
        loss = loss_fn()
        T.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numeric_grad(lambda: float(loss_fn().data), p.data, h=h)
        err = max_rel_err(analytic, numeric)
        worst = max(worst, err)
        assert err < tol, f"gradient mismatch {err:.3g} >= {tol}"
    for p in params:
        p.grad = None
    return worst


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small synthetic labeled corpus shared by cheap tests."""
    raw, oracle = synth_corpus(80, seed=11)
    vocab = build_vocab(raw, 2000)
    pairs = encode_pairs(raw, vocab)
    return raw, pairs, vocab, oracle
