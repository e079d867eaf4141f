"""Pure-numpy fallback for the compiled kernels; bit-compatible contracts."""

import numpy as np


def log_kernel_matrix(nodes: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    d = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(d, 1.0)
    k = -np.log(d)
    np.fill_diagonal(k, 1.5 - np.log(gaps))
    return k


def potential_many(
    nodes: np.ndarray, weights: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    d = np.abs(nodes[None, :] - targets[:, None])
    with np.errstate(divide="ignore"):
        out = -(weights[None, :] * np.log(d)).sum(axis=1)
    out[np.any(d == 0.0, axis=1)] = np.inf
    return out


def cauchy_many(
    nodes: np.ndarray, weights: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    return (weights[None, :] / (nodes[None, :] - targets[:, None])).sum(axis=1)


def quotient_double_sum(
    nodes: np.ndarray,
    weights: np.ndarray,
    hvals: np.ndarray,
    hdiag: np.ndarray,
) -> complex:
    dz = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(dz, 1.0)
    q = (hvals[:, None] - hvals[None, :]) / dz
    np.fill_diagonal(q, hdiag)
    return complex((weights[:, None] * weights[None, :] * q).sum())
