"""Dense complex linear algebra used by every other module.

Eigendecompositions are delegated to LAPACK (``geev``: balancing, Hessenberg
reduction, shifted QR).  :func:`hessenberg_qr_eigvals` is a self-contained
Hessenberg + shifted QR implementation kept as an independent route for
cross-checking eigenvalues.
"""

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg

from .errors import NonConvergence, Singular

DEGENERACY_RTOL = 1e-10
SINGULAR_PIVOT = 1e-300


def as_matrix(A):
    """Validate ``A`` as a finite square matrix and return it as an ndarray."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if not np.iscomplexobj(A):
        A = A.astype(float, copy=False)
    return A


@dataclass(frozen=True)
class EigenSystem:
    """Right eigenvectors ``V`` (unit columns), ``Vinv`` and diagnostics.

    Row ``n`` of ``Vinv`` is the left eigenvector ``psi_n^*`` scaled so that
    ``psi_n^* phi_n = 1``.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    residual: float
    min_gap: float
    norm: float
    degenerate: bool

    @property
    def n(self):
        return len(self.eigenvalues)


def lexicographic_order(w):
    """Permutation sorting complex ``w`` by real part, ties by imaginary part."""
    w = np.asarray(w)
    return np.lexsort((w.imag, w.real))


def min_pairwise_gap(w):
    w = np.asarray(w)
    if len(w) < 2:
        return np.inf
    d = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def operator_norm(A):
    """Largest singular value."""
    A = as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False)[0])


def sigma_min(A):
    """Smallest singular value; zero iff ``A`` is singular to working precision."""
    A = as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def invert(A):
    """Inverse via pivoted LU. Raises :class:`Singular` on a pivot below 1e-300."""
    A = as_matrix(A)
    n = A.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < SINGULAR_PIVOT:
        raise Singular("LU pivot below 1e-300")
    return scipy.linalg.lu_solve((lu, piv), np.eye(n, dtype=lu.dtype), check_finite=False)


def eigendecompose(A, degeneracy_rtol=DEGENERACY_RTOL):
    """Diagonalize ``A`` as ``V^{-1} A V = diag(eigenvalues)``.

    Eigenvalues come back sorted by ``(Re, Im)``; each column of ``V`` has
    Euclidean norm 1.  The system is flagged ``degenerate`` when the smallest
    pairwise eigenvalue gap is below ``degeneracy_rtol * ||A||``; in that case
    projection norms derived from it are not meaningful.
    """
    A = as_matrix(A)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    order = lexicographic_order(w)
    w = w[order]
    V = V[:, order]
    V = V / np.linalg.norm(V, axis=0)

    norm = operator_norm(A)
    resid = np.linalg.norm(A @ V - V * w, 2)
    residual = float(resid / norm) if norm > 0 else float(resid)
    gap = min_pairwise_gap(w)
    degenerate = gap < degeneracy_rtol * norm
    try:
        Vinv = invert(V)
    except Singular:
        # defective input; the gap test has already flagged it in practice
        Vinv = np.full(V.shape, np.nan, dtype=complex)
        degenerate = True
    return EigenSystem(w, V, Vinv, residual, gap, norm, bool(degenerate))


def _givens(x, y):
    r = np.hypot(abs(x), abs(y))
    if r == 0:
        return 1.0, 0.0
    return x / r, y / r


def hessenberg_qr_eigvals(A, max_sweeps=None):
    """Eigenvalues by Hessenberg reduction and Wilkinson-shifted complex QR.

    Deflates from the bottom of the active block.  At most ``100 * n`` QR
    sweeps are performed in total before :class:`NonConvergence` is raised.
    Returned in lexicographic ``(Re, Im)`` order.
    """
    A = as_matrix(A).astype(complex)
    n = A.shape[0]
    H = scipy.linalg.hessenberg(A)
    cap = 100 * n if max_sweeps is None else max_sweeps
    eps = np.finfo(float).eps
    eig = np.empty(n, dtype=complex)
    sweeps = 0
    since_deflation = 0
    hi = n - 1
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        lo = hi
        while lo > 0:
            scale = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if scale == 0:
                scale = np.abs(H).max()
            if abs(H[lo, lo - 1]) <= eps * scale:
                H[lo, lo - 1] = 0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        if sweeps >= cap:
            raise NonConvergence(f"QR iteration did not converge in {cap} sweeps")
        sweeps += 1
        since_deflation += 1

        a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
        c, d = H[hi, hi - 1], H[hi, hi]
        half_tr = (a + d) / 2
        disc = np.sqrt(half_tr * half_tr - (a * d - b * c))
        mu1, mu2 = half_tr + disc, half_tr - disc
        mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2
        if since_deflation % 11 == 10:
            # exceptional shift to break cycles
            mu = d + 0.75 * abs(c)

        B = H[lo:hi + 1, lo:hi + 1]
        m = B.shape[0]
        B -= mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            cs, sn = _givens(B[k, k], B[k + 1, k])
            rows = B[k:k + 2, k:].copy()
            B[k, k:] = np.conj(cs) * rows[0] + np.conj(sn) * rows[1]
            B[k + 1, k:] = -sn * rows[0] + cs * rows[1]
            rots.append((cs, sn))
        for k, (cs, sn) in enumerate(rots):
            top = k + 2
            cols = B[:top, k:k + 2].copy()
            B[:top, k] = cs * cols[:, 0] + sn * cols[:, 1]
            B[:top, k + 1] = -np.conj(sn) * cols[:, 0] + np.conj(cs) * cols[:, 1]
        B += mu * np.eye(m)
    return eig[lexicographic_order(eig)]
