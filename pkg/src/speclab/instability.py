"""Spectral projection norms and the instability indices built from them.

For a simple eigenvalue with right eigenvector ``phi`` and left eigenvector
``psi`` the spectral projection has norm ``|phi| |psi| / |psi^* phi|``.  The
instability index ``i(A)`` is the largest of these over the spectrum; it is
1 for normal matrices and unrelated to the condition number ``||A|| ||A^-1||``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput
from .linalg_core import (
    DEGENERACY_RTOL,
    EigenSystem,
    as_matrix,
    eigendecompose,
    invert,
    operator_norm,
    sigma_min,
)

# 1-based position ceil(N/2) of the ascending list
HALF_LIST_RULE = "ceil(N/2), 1-based, ascending sorted projection norms"


@dataclass(frozen=True)
class ProjectionNormVector:
    """Projection norms in the eigenvalue order of the source system."""

    norms: np.ndarray
    sorted_norms: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "norms", np.asarray(self.norms, dtype=float))
        object.__setattr__(self, "sorted_norms", np.sort(self.norms))

    def __len__(self):
        return len(self.norms)


def _require_simple(es):
    if es.degenerate:
        raise DegenerateInput(
            f"minimum eigenvalue gap {es.min_gap:.3e} below degeneracy threshold"
        )


def projection_norms_direct(es: EigenSystem) -> ProjectionNormVector:
    """Norms from explicit right/left eigenvector pairs."""
    _require_simple(es)
    phi_norm = np.linalg.norm(es.V, axis=0)
    psi_norm = np.linalg.norm(es.Vinv, axis=1)
    overlap = np.abs(np.einsum("nk,kn->n", es.Vinv, es.V))
    return ProjectionNormVector(phi_norm * psi_norm / overlap)


def projection_norms_gram(es: EigenSystem) -> ProjectionNormVector:
    """Norms as square roots of the diagonal of ``Vinv Vinv^*``.

    Relies on the unit-column normalization of ``V`` and ``psi_n^* phi_n = 1``.
    """
    _require_simple(es)
    E = es.Vinv @ es.Vinv.conj().T
    return ProjectionNormVector(np.sqrt(np.abs(np.diag(E))))


def _norms(A, es, method):
    if es is None:
        es = eigendecompose(A)
    if method == "gram":
        return projection_norms_gram(es)
    if method == "direct":
        return projection_norms_direct(es)
    raise ValueError(f"unknown method {method!r}")


def instability_index(A, es=None, method="gram") -> float:
    """Largest spectral projection norm of ``A``."""
    return float(_norms(A, es, method).sorted_norms[-1])


def half_list_position(N):
    """0-based index of the half-way entry of an ascending list of length N."""
    return math.ceil(N / 2) - 1


def half_list_from_norms(norms):
    s = np.sort(np.asarray(norms, dtype=float))
    return float(s[half_list_position(len(s))])


def half_list_index(A, es=None, method="gram") -> float:
    """Projection norm half way through the ascending list (see ``HALF_LIST_RULE``)."""
    return half_list_from_norms(_norms(A, es, method).norms)


def condition_number(A) -> float:
    A = as_matrix(A)
    return operator_norm(A) * operator_norm(invert(A))


@dataclass
class ResolventReport:
    """Numerical check of the diagonalizer -> resolvent -> projection chain.

    ``kappa_V`` is the condition number of the solver's unit-column
    diagonalizer, one admissible constant for the chain.  For every sample
    point ``resolvent_norms[j] <= resolvent_bounds[j]`` should hold, where the
    bound is ``N i(A) / dist(z, Spec A)``.
    """

    n: int
    instability_index: float
    kappa_V: float
    z: np.ndarray
    dist: np.ndarray
    resolvent_norms: np.ndarray
    resolvent_bounds: np.ndarray
    resolvent_ok: np.ndarray
    chain_ok: bool
    rtol: float

    @property
    def all_ok(self):
        return bool(self.chain_ok and np.all(self.resolvent_ok))


def resolvent_diagnostics(A, z_samples, rtol=1e-6, degeneracy_rtol=DEGENERACY_RTOL):
    A = as_matrix(A)
    es = eigendecompose(A, degeneracy_rtol=degeneracy_rtol)
    index = instability_index(A, es=es)
    kappa_V = operator_norm(es.V) * operator_norm(es.Vinv)
    z = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    n = A.shape[0]
    eye = np.eye(n)
    dist = np.array([np.abs(es.eigenvalues - zz).min() for zz in z])
    if np.any(dist == 0):
        raise ValueError("sample point coincides with an eigenvalue")
    lhs = np.array([1.0 / sigma_min(A - zz * eye) for zz in z])
    rhs = n * index / dist
    return ResolventReport(
        n=n,
        instability_index=index,
        kappa_V=kappa_V,
        z=z,
        dist=dist,
        resolvent_norms=lhs,
        resolvent_bounds=rhs,
        resolvent_ok=lhs <= rhs * (1 + rtol),
        chain_ok=bool(index <= kappa_V * (1 + rtol)),
        rtol=rtol,
    )
