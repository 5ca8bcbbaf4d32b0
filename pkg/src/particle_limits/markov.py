"""Transient distributions of finite continuous-time Markov chains by uniformization."""
import numpy as np
from scipy import sparse
from scipy.stats import poisson


def uniformized_transient(Q, p0, t, tol=1e-10):
    """Return ``p0 @ expm(t Q)`` for a generator ``Q`` (dense or sparse, rows sum to 0).

    With ``L >= max |Q_ii|`` and ``P = I + Q / L``,
    ``p(t) = sum_k Poisson(k; L t) p0 P^k``; the series is cut once the
    neglected Poisson tail mass drops below ``tol``. Returns ``(p, info)``.
    """
    p0 = np.asarray(p0, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    Qs = sparse.csr_matrix(Q)
    rate = float(np.max(-Qs.diagonal())) if Qs.shape[0] else 0.0
    if t == 0 or rate == 0.0:
        return p0.copy(), {"terms": 1, "tail": 0.0, "rate": rate}
    P = sparse.identity(Qs.shape[0], format="csr") + Qs / rate
    lam = rate * t
    kmax = int(poisson.isf(tol, lam)) + 1
    while poisson.sf(kmax, lam) >= tol:
        kmax += 1
    weights = poisson.pmf(np.arange(kmax + 1), lam)
    PT = P.T.tocsr()
    v = p0.copy()
    out = weights[0] * v
    for k in range(1, kmax + 1):
        v = PT @ v
        out += weights[k] * v
    return out, {"terms": kmax + 1, "tail": float(poisson.sf(kmax, lam)), "rate": rate}


def total_variation(p, q):
    """Half the L1 distance between two probability tables (dicts or aligned arrays)."""
    if isinstance(p, dict):
        keys = set(p) | set(q)
        return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def empirical_table(samples):
    """Frequency table over hashable samples."""
    counts = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    n = len(samples)
    return {k: c / n for k, c in counts.items()}
