"""Fixed-point ICA (tanh contrast, deflation) with seeded initialisation."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateSignalError

#: Whitening fails when the smallest covariance eigenvalue falls below this
#: fraction of the largest.
COLINEAR_RTOL = 1e-10


def whiten(x: np.ndarray):
    """Centre rows of ``x`` (channels x samples) and decorrelate them.

    Returns ``(z, w_white, mean)`` with ``z = w_white @ (x - mean)`` having
    identity covariance.
    """
    mean = x.mean(axis=1, keepdims=True)
    xc = x - mean
    cov = xc @ xc.T / xc.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0 or evals[0] <= COLINEAR_RTOL * evals[-1]:
        raise DegenerateSignalError(
            "channels are colinear (singular covariance); ICA is undefined"
        )
    w_white = (evecs / np.sqrt(evals)).T
    return w_white @ xc, w_white, mean


def fastica(x: np.ndarray, n_components=None, seed=0, max_iter=400, tol=1e-7):
    """Estimate independent sources from mixtures ``x`` (channels x samples).

    Components are extracted one at a time with Gram-Schmidt deflation.
    Returns ``(sources, unmixing)`` where ``sources = unmixing @ (x - mean)``.
    """
    x = np.asarray(x, dtype=float)
    z, w_white, _ = whiten(x)
    m = z.shape[0] if n_components is None else n_components
    rng = np.random.default_rng(seed)
    w_init = rng.standard_normal((m, z.shape[0]))
    n = z.shape[1]
    rows = []
    for p in range(m):
        w = w_init[p]
        for prev in rows:
            w = w - (w @ prev) * prev
        w /= np.linalg.norm(w)
        for _ in range(max_iter):
            wx = w @ z
            g = np.tanh(wx)
            w_new = (z * g).sum(axis=1) / n - (1 - g**2).mean() * w
            for prev in rows:
                w_new = w_new - (w_new @ prev) * prev
            w_new /= np.linalg.norm(w_new)
            converged = abs(abs(w_new @ w) - 1) < tol
            w = w_new
            if converged:
                break
        rows.append(w)
    unmixing = np.array(rows) @ w_white
    return np.array(rows) @ z, unmixing
