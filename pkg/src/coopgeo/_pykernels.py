"""Pure numpy implementations of the per-symbol error kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop by
loop. Both consume pre-drawn random arrays so that the choice of backend
never changes the random stream.
"""
import numpy as np
from scipy.special import erfc

_SQRT_HALF = np.sqrt(0.5)


def qam_ser(gamma, M):
    """Conditional symbol error probability of square M-QAM at SNR ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    k = 1.0 - 1.0 / np.sqrt(M)
    q = 0.5 * erfc(np.sqrt(3.0 * gamma / (M - 1)) * _SQRT_HALF)
    return 4.0 * k * q - 4.0 * k * k * q * q


def count_errors(gamma, u, M):
    gamma = np.asarray(gamma, dtype=float)
    u = np.asarray(u, dtype=float)
    return int(np.count_nonzero(u < qam_ser(gamma, M)))


def count_coop_errors(g_sf, g_sr, g_rf, u, gamma_th, M):
    g_sf = np.asarray(g_sf, dtype=float)
    combined = g_sf + np.where(np.asarray(g_sr) > gamma_th, np.asarray(g_rf, dtype=float), 0.0)
    return count_errors(combined, u, M)


def first_error(gamma, u, M):
    """Index of the first symbol in error, or -1 if the block decodes."""
    hits = np.flatnonzero(np.asarray(u, dtype=float) < qam_ser(gamma, M))
    return int(hits[0]) if hits.size else -1
