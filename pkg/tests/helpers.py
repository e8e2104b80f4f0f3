"""Shared oracles and builders for the test suite.

Everything here is deliberately naive: exhaustive recursions and
element-wise finite differences that are independent of the library's
own dynamic programming and backpropagation code paths.
"""
import numpy as np

from slukit.corpus import Token, Utterance


def utt(uid, words, labels=None, flags=None, **token_kw):
    labels = labels or [None] * len(words)
    flags = flags or [None] * len(words)
    toks = tuple(
        Token(surface=w, label=lab, error_flag=fl, **token_kw)
        for w, lab, fl in zip(words, labels, flags)
    )
    return Utterance(uid, toks)


def brute_force_edit_cost(ref, hyp, sub=1.0, ins=1.0, dele=1.0):
    """Minimal edit cost by exhaustive recursion (no DP)."""

    def rec(i, j):
        if i == len(ref) and j == len(hyp):
            return 0.0
        best = float("inf")
        if i < len(ref) and j < len(hyp):
            step = 0.0 if ref[i] == hyp[j] else sub
            best = min(best, rec(i + 1, j + 1) + step)
        if i < len(ref):
            best = min(best, rec(i + 1, j) + dele)
        if j < len(hyp):
            best = min(best, rec(i, j + 1) + ins)
        return best

    return rec(0, 0)


def fd_gradcheck(loss_fn, params, grads, h=1e-4, floor=1e-2):
    """Max relative error between analytic grads and central differences.

    `params` maps names to arrays that `loss_fn` reads; each entry is
    perturbed in place and restored.  The denominator floor turns the
    check into an absolute one (at `h * floor` scale) for near-zero
    components, where relative error is dominated by difference noise.
    """
    worst = 0.0
    for name in sorted(params):
        arr = params[name]
        gflat = np.asarray(grads[name], dtype=float).reshape(-1)
        flat = arr.reshape(-1)
        assert flat.size == gflat.size, name
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_fn()
            flat[idx] = orig - h
            lm = loss_fn()
            flat[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(fd - gflat[idx]) / max(abs(fd), abs(gflat[idx]), floor)
            worst = max(worst, rel)
    return worst
