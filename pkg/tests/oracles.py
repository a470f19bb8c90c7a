"""Reference computations used to check the library; deliberately naive."""

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog


def interior_margin(H):
    """Largest t such that some simplex w with H'w = 0 has all w_i >= t (LP).

    Positive iff the origin is in the interior of the hull of the rows,
    i.e. a strictly positive feasible weight vector exists.
    """
    H = np.atleast_2d(np.asarray(H, float))
    w = _max_margin_weights(H)
    return -np.inf if w is None else float(w.min())


def grid_el_oracle(H, resolution=1e-3):
    """Brute-force max of mean(log w) over {w in simplex : H'w = 0}.

    The feasible polytope is parametrised as w0 + N t with N a null-space
    basis, then searched on a regular grid that is repeatedly re-centred on
    the best point and halved until the cell width is far below ``resolution``.
    Returns -inf when no strictly positive grid point is found.
    """
    H = np.atleast_2d(np.asarray(H, float))
    m, r = H.shape
    A = np.vstack([H.T, np.ones(m)])
    b = np.zeros(r + 1)
    b[-1] = 1.0
    w0 = np.linalg.lstsq(A, b, rcond=None)[0]
    if not np.allclose(A @ w0, b, atol=1e-9):
        return -np.inf
    N = null_space(A)
    d = N.shape[1]

    def value(W):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.all(W > 0, axis=1), np.log(np.clip(W, 1e-300, None)).mean(axis=1), -np.inf)
        return out

    if d == 0:
        return float(value(w0[None, :])[0])

    # start from the max-margin point of the LP so thin polytopes are hit
    w_star = _max_margin_weights(H)
    if w_star is None:
        return -np.inf
    centre = N.T @ (w_star - w0)
    half = np.sqrt(m)
    best = float(value((w0 + N @ centre)[None, :])[0])
    n_pts = {1: 201, 2: 41, 3: 13}.get(d, 7)
    while 2 * half / (n_pts - 1) > resolution * 1e-3:
        axes = [np.linspace(c - half, c + half, n_pts) for c in centre]
        T = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        vals = value(w0 + T @ N.T)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            centre = T[k]
        half *= 0.5
    return best


def _max_margin_weights(H):
    m, r = H.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.zeros((r + 1, m + 1))
    A_eq[:r, :m] = H.T
    A_eq[r, :m] = 1.0
    b_eq = np.zeros(r + 1)
    b_eq[r] = 1.0
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, 1)] * m + [(None, 1)], method="highs")
    if res.status != 0:
        return None
    return res.x[:m]


def mvn_logpdf(x, mean, cov):
    """Multivariate normal log density by explicit inverse and determinant."""
    x = np.asarray(x, float)
    diff = x - mean
    k = len(x)
    inv = np.linalg.inv(cov)
    sign, logdet = np.linalg.slogdet(cov)
    return -0.5 * (k * np.log(2 * np.pi) + logdet + diff @ inv @ diff)


def normal_equations(X, Y):
    """Least squares with intercept via (X'X)^{-1} X'Y."""
    Z = np.column_stack([np.ones(len(X)), X])
    return np.linalg.solve(Z.T @ Z, Z.T @ Y)
