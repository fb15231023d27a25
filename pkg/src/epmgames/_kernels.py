"""Monte Carlo hot loops: a numba-jitted walker with a pure-numpy fallback.

The coupled-play sampler is the only numeric inner loop in the package that
runs at scale (10**5 samples and up); everything exact lives elsewhere in
rational arithmetic.  Backend selection:

* ``auto``  - numba when importable, unless ``EPMGAMES_NO_NUMBA`` is set
* ``numba`` - force the jitted per-sample walker (raises if unavailable)
* ``numpy`` - force the vectorized fallback

The two backends draw from different RNG streams, so per-sample output
differs between them; summary statistics agree.  Determinism holds per
(seed, backend).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

ENV_FLAG = "EPMGAMES_NO_NUMBA"


def numba_enabled() -> bool:
    if not _HAVE_NUMBA:
        return False
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def resolve_backend(backend: str) -> str:
    if backend == "auto":
        return "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return "numba"
    if backend == "numpy":
        return "numpy"
    raise ValueError(f"unknown backend {backend!r}")


def _coupled_walk(n_samples, horizon, k, atom_flat, atom_off, row_off, dists_a, dists_b, seed,
                  out_idx, out_idx2, out_div):
    np.random.seed(seed)
    for s in range(n_samples):
        idx = 0
        idx2 = 0
        div = -1
        for n in range(horizon):
            ra = row_off[n] + atom_flat[atom_off[n] + idx]
            rb = row_off[n] + atom_flat[atom_off[n] + idx2]
            overlap = 0.0
            for j in range(k):
                pj = dists_a[ra, j]
                qj = dists_b[rb, j]
                overlap += pj if pj < qj else qj
            u = np.random.random()
            if u < overlap:
                v = np.random.random() * overlap
                acc = 0.0
                a = k - 1
                for j in range(k):
                    pj = dists_a[ra, j]
                    qj = dists_b[rb, j]
                    acc += pj if pj < qj else qj
                    if v < acc:
                        a = j
                        break
                a2 = a
            else:
                rest = 1.0 - overlap
                if rest <= 0.0:
                    rest = 1e-300
                v = np.random.random() * rest
                acc = 0.0
                a = k - 1
                for j in range(k):
                    pj = dists_a[ra, j]
                    qj = dists_b[rb, j]
                    acc += pj - (pj if pj < qj else qj)
                    if v < acc:
                        a = j
                        break
                v2 = np.random.random() * rest
                acc = 0.0
                a2 = k - 1
                for j in range(k):
                    pj = dists_a[ra, j]
                    qj = dists_b[rb, j]
                    acc += qj - (pj if pj < qj else qj)
                    if v2 < acc:
                        a2 = j
                        break
            if a != a2 and div < 0:
                div = n
            idx = idx * k + a
            idx2 = idx2 * k + a2
        out_idx[s] = idx
        out_idx2[s] = idx2
        out_div[s] = div


_coupled_walk_jit = None


def _get_jitted():
    global _coupled_walk_jit
    if _coupled_walk_jit is None:
        _coupled_walk_jit = numba.njit(cache=False)(_coupled_walk)
    return _coupled_walk_jit


def _coupled_walk_numpy(n_samples, horizon, k, atom_flat, atom_off, row_off, dists_a, dists_b, seed):
    rng = np.random.default_rng(seed)
    idx = np.zeros(n_samples, dtype=np.int64)
    idx2 = np.zeros(n_samples, dtype=np.int64)
    div = np.full(n_samples, -1, dtype=np.int64)
    for n in range(horizon):
        pa = dists_a[row_off[n] + atom_flat[atom_off[n] + idx]]
        pb = dists_b[row_off[n] + atom_flat[atom_off[n] + idx2]]
        mnm = np.minimum(pa, pb)
        overlap = mnm.sum(axis=1)
        same = rng.random(n_samples) < overlap
        v = rng.random(n_samples) * np.maximum(overlap, 1e-300)
        a_same = (v[:, None] >= np.cumsum(mnm, axis=1)).sum(axis=1)
        rest = np.maximum(1.0 - overlap, 1e-300)
        va = rng.random(n_samples) * rest
        vb = rng.random(n_samples) * rest
        a_diff = (va[:, None] >= np.cumsum(pa - mnm, axis=1)).sum(axis=1)
        b_diff = (vb[:, None] >= np.cumsum(pb - mnm, axis=1)).sum(axis=1)
        a = np.where(same, a_same, a_diff).clip(0, k - 1)
        b = np.where(same, a_same, b_diff).clip(0, k - 1)
        first = (div < 0) & (a != b)
        div[first] = n
        idx = idx * k + a
        idx2 = idx2 * k + b
    return idx, idx2, div


def coupled_walk(n_samples: int, horizon: int, k: int, atom_flat, atom_off, row_off,
                 dists_a, dists_b, seed: int, backend: str = "auto"):
    """Sample coupled play pairs; returns (alpha indices, alpha' indices, divergence stages)."""
    chosen = resolve_backend(backend)
    if chosen == "numpy":
        return _coupled_walk_numpy(n_samples, horizon, k, atom_flat, atom_off, row_off,
                                   dists_a, dists_b, seed)
    out_idx = np.empty(n_samples, dtype=np.int64)
    out_idx2 = np.empty(n_samples, dtype=np.int64)
    out_div = np.empty(n_samples, dtype=np.int64)
    _get_jitted()(n_samples, horizon, k, atom_flat, atom_off, row_off,
                  dists_a, dists_b, seed, out_idx, out_idx2, out_div)
    return out_idx, out_idx2, out_div
