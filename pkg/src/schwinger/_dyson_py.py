"""Pure-numpy Dyson prefix recurrence (fallback for the compiled kernel)."""

import numpy as np

MODE_STRICT = 0
MODE_WEIGHTED = 1
MODE_UNWEIGHTED = 2


def dyson_terms(v, d, delta, m_steps, k_max, mode):
    """Scaled Dyson orders ``T_k = (-i delta)^k B_k`` for ``k = 0..k_max``.

    ``v`` is the dense interaction (C-contiguous complex128), ``d`` the
    diagonal of ``H0``.  Grid points are ``s_m = m * delta`` for
    ``m = 0..m_steps-1`` with ``W_m = -i delta V(s_m)``.

    ``mode`` selects the tuple set:

    * ``MODE_STRICT``: strictly increasing time indices.
      ``P_k <- P_k + W_m P_{k-1}`` (descending ``k``).
    * ``MODE_WEIGHTED``: non-decreasing indices, a run of ``n`` equal
      indices weighted ``1/n!``.  ``Q_k <- sum_n W_m^n / n! Q_{k-n}``.
    * ``MODE_UNWEIGHTED``: non-decreasing indices, unit weights.
    """
    v = np.ascontiguousarray(v, dtype=np.complex128)
    d = np.ascontiguousarray(d, dtype=np.float64)
    dim = v.shape[0]
    out = np.zeros((k_max + 1, dim, dim), dtype=np.complex128)
    out[0] = np.eye(dim)
    for m in range(m_steps):
        ph = np.exp(1j * (m * delta) * d)
        w = (-1j * delta) * (ph[:, None] * v * ph.conj()[None, :])
        for k in range(k_max, 0, -1):
            if mode == MODE_STRICT:
                out[k] += w @ out[k - 1]
                continue
            acc = out[0].copy()
            for n in range(k, 1, -1):
                scale = 1.0 / n if mode == MODE_WEIGHTED else 1.0
                acc = out[k - n + 1] + scale * (w @ acc)
            out[k] += w @ acc
    return out
