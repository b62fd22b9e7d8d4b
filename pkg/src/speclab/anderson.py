"""Spectral geometry of the non-self-adjoint Anderson model.

The potential-free hopping operator ``e^-g f_{n-1} + e^g f_{n+1}`` on l^2(Z)
is normal with spectrum the ellipse ``E = {e^g e^{it} + e^-g e^{-it}}``.
This module provides membership tests for E and its translates, the convex
hull and distance-tube inclusion bounds, the spectrum-free disc around the
origin, pseudospectral grids, and explicit eigenvector witnesses for the
step operators whose eigenvalues fill ``interior(E + alpha) & exterior(E + beta)``.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateEllipse,
    DegenerateRoots,
    NotNormalized,
    RootConditionFailed,
)
from .linalg_core import as_matrix
from .models import DIRICHLET, PERIODIC, hopping_matrix

BOUNDARY_TOL = 1e-9
ROOT_MARGIN = 1e-12
CURVE_NODES = 4096
GRID_AXIS_ORDER = "values[iy, ix]: imaginary index outer, real index inner"


class Membership(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class EllipseEF:
    """The closed curve ``{p e^{it} + q e^{-it}}`` (a segment when p == q)."""

    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")

    @classmethod
    def hopping(cls, g):
        return cls(math.exp(g), math.exp(-g))

    @property
    def real_semi_axis(self):
        return self.p + self.q

    @property
    def imag_semi_axis(self):
        return abs(self.p - self.q)

    @property
    def degenerate(self):
        return self.p == self.q

    def point(self, theta):
        return self.p * np.exp(1j * theta) + self.q * np.exp(-1j * theta)

    def quadratic_form(self, z):
        """``(Re z / a)^2 + (Im z / b)^2``; below 1 strictly inside."""
        if self.degenerate:
            raise DegenerateEllipse("p == q: the ellipse is a segment")
        z = np.asarray(z, dtype=complex)
        return (z.real / self.real_semi_axis) ** 2 + (z.imag / self.imag_semi_axis) ** 2


def ellipse_membership(z, e: EllipseEF, tol=BOUNDARY_TOL) -> Membership:
    t = float(e.quadratic_form(z))
    if abs(t - 1) <= tol:
        return Membership.BOUNDARY
    return Membership.INTERIOR if t < 1 else Membership.EXTERIOR


def quadratic_roots(a, b, c):
    """Both roots of ``a w^2 + b w + c`` (complex, a != 0)."""
    a, b, c = complex(a), complex(b), complex(c)
    disc = np.sqrt(b * b - 4 * a * c)
    # avoid cancellation: pick the larger-modulus numerator
    q = -(b + disc) / 2 if abs(b + disc) >= abs(b - disc) else -(b - disc) / 2
    if q == 0:
        return 0j, 0j
    return q / a, c / q


def ellipse_membership_roots(z, x, y) -> Membership:
    """Interior of ``{x e^{it} + y e^{-it}}`` iff both roots of
    ``x - z w + y w^2`` lie strictly inside the unit disc.

    With ``x > y`` the roles are swapped (adjoint picture); the ellipse is the
    same set either way.
    """
    if not (x > 0 and y > 0):
        raise ValueError("x and y must be positive")
    if x > y:
        x, y = y, x
    w1, w2 = quadratic_roots(y, -z, x)
    if max(abs(w1), abs(w2)) < 1 - ROOT_MARGIN:
        return Membership.INTERIOR
    return Membership.EXTERIOR


def inclusion_bound_hull(z, g, interval, tol=BOUNDARY_TOL) -> bool:
    """Whether ``z`` lies in conv(E) + [lo, hi].

    The closest real shift is ``Re z`` clipped to the interval, so a single
    ellipse test decides membership.
    """
    lo, hi = interval
    e = EllipseEF.hopping(g)
    t = min(max(complex(z).real, lo), hi)
    return bool(e.quadratic_form(complex(z) - t) <= 1 + tol)


def distance_to_ellipse(z, e: EllipseEF, nodes=CURVE_NODES, xtol=1e-12):
    """Distance from ``z`` to the curve: dense sampling, then bounded scalar
    minimization around the best node."""
    z = complex(z)
    theta = np.linspace(0, 2 * np.pi, nodes, endpoint=False)
    d = np.abs(e.point(theta) - z)
    k = int(np.argmin(d))
    h = 2 * np.pi / nodes
    # squared distance is smooth at a touching point, unlike the modulus
    res = minimize_scalar(
        lambda t: abs(e.point(t) - z) ** 2,
        bounds=(theta[k] - h, theta[k] + h),
        method="bounded",
        options={"xatol": xtol},
    )
    return float(min(math.sqrt(res.fun), d[k]))


def inclusion_bound_tube(z, g, m, tol=BOUNDARY_TOL) -> bool:
    """Whether ``dist(z, E) <= m``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    return distance_to_ellipse(z, EllipseEF.hopping(g)) <= m + tol


def hole_radius(g, B):
    """Radius ``e^g - e^-g - B`` of the spectrum-free disc, or None if not positive."""
    if B < 0:
        raise ValueError("B must be >= 0")
    r = math.exp(g) - math.exp(-g) - B
    return r if r > 0 else None


def minkowski_sum_contains(z, e: EllipseEF, f: EllipseEF, tol=1e-6, nodes=CURVE_NODES):
    """Whether ``z`` lies in the set sum ``E + F`` of two ellipse curves.

    ``z`` is in E + F iff ``z - f(t)`` crosses the curve E for some t, i.e.
    the quadratic form of E along ``z - f(t)`` attains values on both sides of 1.
    """
    theta = np.linspace(0, 2 * np.pi, nodes, endpoint=False)
    if e.degenerate and f.degenerate:
        raise DegenerateEllipse("both ellipses are segments")
    if e.degenerate:
        e, f = f, e
    t = e.quadratic_form(complex(z) - f.point(theta))
    # the form has gradient of order 1/semi-axis; convert tol from distance
    slack = 2 * tol / min(e.real_semi_axis, e.imag_semi_axis)
    return bool(t.min() <= 1 + slack and t.max() >= 1 - slack)


@dataclass
class InclusionReport:
    """Per-eigenvalue outcome of the hull, tube and hole tests."""

    hull_ok: np.ndarray
    tube_ok: np.ndarray
    hole_radius: float
    in_hole: np.ndarray

    @property
    def hull_violations(self):
        return int((~self.hull_ok).sum())

    @property
    def tube_violations(self):
        return int((~self.tube_ok).sum())

    @property
    def hole_violations(self):
        return int(self.in_hole.sum())

    def summary(self):
        return {
            "hull_violations": self.hull_violations,
            "tube_violations": self.tube_violations,
            "hole_radius": self.hole_radius,
            "hole_violations": self.hole_violations,
        }


def inclusion_report(eigenvalues, g, potential) -> InclusionReport:
    """Hull, tube and hole checks for a list of eigenvalues under a potential law."""
    w = np.asarray(eigenvalues, dtype=complex)
    support = potential.support
    m = potential.max_abs
    hull = np.array([inclusion_bound_hull(z, g, support) for z in w], dtype=bool)
    tube = np.array([inclusion_bound_tube(z, g, m) for z in w], dtype=bool)
    # dist(z, E) >= 2 sinh(g) - |z|, so the tube bound clears this disc
    r = hole_radius(g, m)
    in_hole = np.abs(w) < r if r is not None else np.zeros(len(w), dtype=bool)
    return InclusionReport(hull, tube, 0.0 if r is None else r, in_hole)


# --- Dirichlet similarity -------------------------------------------------------

def dirichlet_symmetrized(H, g):
    """Conjugate a Dirichlet truncation by ``diag(e^{-ng})``: the hoppings
    become 1 on both sides and the diagonal is unchanged."""
    H = as_matrix(H)
    n = H.shape[0]
    S = np.diag(np.ones(n - 1), -1) + np.diag(np.ones(n - 1), 1)
    S[np.diag_indices(n)] = np.real(np.diag(H))
    return S


@dataclass
class RealnessDiagnostic:
    raw_eigenvalues: np.ndarray
    symmetrized_eigenvalues: np.ndarray
    max_abs_imag: float
    max_deviation: float
    norm: float
    tol: float

    @property
    def raw_real(self):
        """Raw nonsymmetric solve reproduced a real spectrum to ``tol * ||H||``."""
        return bool(self.max_abs_imag <= self.tol * self.norm)


def dirichlet_realness(H, g, tol=1e-6):
    """Compare a raw nonsymmetric eigen-solve of a Dirichlet truncation with
    the eigenvalues of its symmetrized similar matrix (real by construction).
    A failure of ``raw_real`` is the instability of the raw solve, not hidden."""
    H = as_matrix(H)
    raw = np.linalg.eigvals(H)
    raw = raw[np.lexsort((raw.imag, raw.real))]
    sym = np.linalg.eigvalsh(dirichlet_symmetrized(H, g))
    return RealnessDiagnostic(
        raw_eigenvalues=raw,
        symmetrized_eigenvalues=sym,
        max_abs_imag=float(np.abs(raw.imag).max()),
        max_deviation=float(np.abs(np.sort(raw.real) - sym).max()),
        norm=float(np.linalg.norm(H, 2)),
        tol=tol,
    )


# --- pseudospectra --------------------------------------------------------------

@dataclass(frozen=True)
class PseudospectrumGrid:
    rectangle: tuple
    resolution: tuple
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray
    axis_order: str = GRID_AXIS_ORDER

    def rows(self):
        """(re, im, sigma_min) triples, imaginary index outer."""
        for iy, y in enumerate(self.im):
            for ix, x in enumerate(self.re):
                yield float(x), float(y), float(self.values[iy, ix])

    def header(self):
        re_min, re_max, im_min, im_max = self.rectangle
        nx, ny = self.resolution
        return {
            "re_min": re_min,
            "re_max": re_max,
            "im_min": im_min,
            "im_max": im_max,
            "nx": nx,
            "ny": ny,
            "axis_order": self.axis_order,
            "quantity": "smallest singular value of A - z I",
        }


def _sigma_min_many(A, zs, chunk):
    n = A.shape[0]
    out = np.empty(len(zs))
    eye = np.eye(n)
    for start in range(0, len(zs), chunk):
        z = zs[start:start + chunk]
        stack = A[None, :, :] - z[:, None, None] * eye
        out[start:start + chunk] = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return out


def pseudospectrum_grid(A, rectangle, resolution, threads=1) -> PseudospectrumGrid:
    """``sigma_min(A - z I)`` on an ``nx`` by ``ny`` grid of the rectangle
    ``(re_min, re_max, im_min, im_max)``, endpoints included."""
    A = as_matrix(A).astype(complex)
    re_min, re_max, im_min, im_max = (float(v) for v in rectangle)
    nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 x 2")
    re = np.linspace(re_min, re_max, nx)
    im = np.linspace(im_min, im_max, ny)
    zs = (re[None, :] + 1j * im[:, None]).ravel()
    n = A.shape[0]
    chunk = max(1, 2**22 // (n * n))
    if threads <= 1:
        vals = _sigma_min_many(A, zs, chunk)
    else:
        parts = np.array_split(zs, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = np.concatenate(list(pool.map(lambda p: _sigma_min_many(A, p, chunk), parts)))
    return PseudospectrumGrid(
        (re_min, re_max, im_min, im_max), (nx, ny), re, im, vals.reshape(ny, nx)
    )


# --- explicit eigenvector witnesses ---------------------------------------------

@dataclass
class EigenvectorWitness:
    """A truncated, normalized approximate eigenvector.

    ``residual`` is the full truncation residual ``||T f - lam f||`` (boundary
    rows included, so it shrinks with the truncation size);
    ``interior_residual`` drops the two boundary rows.  Both are divided by
    ``|lam|`` when ``relative`` is set and ``lam != 0``.
    """

    sites: np.ndarray
    vector: np.ndarray
    eigenvalue: complex
    residual: float
    interior_residual: float
    roots: dict
    relative: bool = True


def _residuals(T, f, lam, relative):
    r = T @ f - lam * f
    scale = abs(lam) if relative and lam != 0 else 1.0
    return float(np.linalg.norm(r) / scale), float(np.linalg.norm(r[1:-1]) / scale)


def _step_vector(g, alpha, beta, lam, sites, split):
    """Eigenvector of the infinite step operator (``alpha`` on sites >= split,
    ``beta`` below) evaluated on ``sites``.  Returns ``(f, roots)``."""
    lam = complex(lam)
    e = EllipseEF.hopping(g)
    if e.quadratic_form(lam - alpha) >= 1 or e.quadratic_form(lam - beta) <= 1:
        raise RootConditionFailed(
            f"lambda={lam} is not inside E+{alpha} and outside E+{beta}"
        )
    # e^-g / u + alpha + e^g u = lam  <=>  e^g u^2 + (alpha - lam) u + e^-g = 0
    u1, u2 = quadratic_roots(math.exp(g), alpha - lam, math.exp(-g))
    if max(abs(u1), abs(u2)) >= 1 - ROOT_MARGIN:
        raise RootConditionFailed(f"|u| >= 1 for roots {u1}, {u2}")
    if abs(u1 - u2) <= ROOT_MARGIN * max(1.0, abs(u1)):
        raise DegenerateRoots(f"double root u = {u1}")
    v1, v2 = quadratic_roots(math.exp(g), beta - lam, math.exp(-g))
    v = v1 if abs(v1) >= abs(v2) else v2
    if abs(v) <= 1 + ROOT_MARGIN:
        raise RootConditionFailed(f"no root with |v| > 1 among {v1}, {v2}")
    # j = n - split + 1: j <= 0 carries v^j, j >= 1 carries c1 u1^j + c2 u2^j.
    # Matching rows j = 0, 1 forces c1 + c2 = 1 and c1 u1 + c2 u2 = v.
    c1 = (v - u2) / (u1 - u2)
    c2 = (u1 - v) / (u1 - u2)
    j = np.asarray(sites) - split + 1
    f = np.empty(len(j), dtype=complex)
    left = j <= 0
    f[left] = v ** j[left].astype(float)
    jr = j[~left].astype(float)
    f[~left] = c1 * u1**jr + c2 * u2**jr
    roots = {"u": (u1, u2), "v": v, "c": (c1, c2)}
    return f, roots


def k_eigenvector(g, alpha, beta, lam, N) -> EigenvectorWitness:
    """Approximate eigenvector of the step operator ``K`` (``alpha`` on
    n >= 1, ``beta`` on n <= 0) truncated to -N..N."""
    sites = np.arange(-N, N + 1)
    f, roots = _step_vector(g, alpha, beta, lam, sites, split=1)
    f /= np.linalg.norm(f)
    K = np.diag(np.where(sites >= 1, alpha, beta).astype(float)) + hopping_matrix(g, len(sites))
    res, inner = _residuals(K, f, complex(lam), relative=True)
    return EigenvectorWitness(sites, f, complex(lam), res, inner, roots)


def bv_eigenvector(x, y, z, N) -> EigenvectorWitness:
    """Approximate eigenvector ``f_r = w1^r - w2^r`` (r = 1..N) of the
    half-line operator with ``x`` below and ``y`` above the diagonal."""
    if ellipse_membership_roots(z, x, y) is not Membership.INTERIOR:
        raise RootConditionFailed(f"z={z} is not inside the ellipse for x={x}, y={y}")
    w1, w2 = quadratic_roots(y, -z, x)
    if max(abs(w1), abs(w2)) >= 1 - ROOT_MARGIN:
        # x > y: the decaying solution lives on the adjoint side
        raise RootConditionFailed(f"|w| >= 1 for roots {w1}, {w2}")
    if abs(w1 - w2) <= ROOT_MARGIN * max(1.0, abs(w1)):
        raise DegenerateRoots(f"double root w = {w1} (z^2 = 4xy)")
    r = np.arange(1, N + 1, dtype=float)
    f = w1**r - w2**r
    f /= np.linalg.norm(f)
    T = np.diag(np.full(N - 1, float(x)), -1) + np.diag(np.full(N - 1, float(y)), 1)
    res, inner = _residuals(T, f, complex(z), relative=False)
    return EigenvectorWitness(r.astype(int), f, complex(z), res, inner, {"w": (w1, w2)}, relative=False)


def variance_functional(f, sites=None, tol=1e-10):
    """Positional variance ``<Q^2 f, f> - <Q f, f>^2`` of a unit vector."""
    f = np.asarray(f)
    if abs(np.linalg.norm(f) - 1) > tol:
        raise NotNormalized(f"norm {np.linalg.norm(f)!r} differs from 1")
    q = np.arange(len(f), dtype=float) if sites is None else np.asarray(sites, dtype=float)
    p = np.abs(f) ** 2
    mean = float(p @ q)
    return float(p @ q**2 - mean**2)


# --- two dimensions -------------------------------------------------------------

def apply_anderson_2d(F, g, h, V):
    """Matrix-free Dirichlet 2D operator on an array ``F[m, n]``."""
    out = V * F
    out[1:, :] += math.exp(-g) * F[:-1, :]
    out[:-1, :] += math.exp(g) * F[1:, :]
    out[:, 1:] += math.exp(-h) * F[:, :-1]
    out[:, :-1] += math.exp(h) * F[:, 1:]
    return out


@dataclass
class TensorSumReport:
    eigenvalue: complex
    residual: float
    residual_1: float
    residual_2: float
    bound: float
    product_norm: float

    @property
    def within_bound(self):
        return self.residual <= self.bound * (1 + 1e-9) + 1e-15


def tensor_sum_check(g, h, alpha, beta, lam1, lam2, N) -> TensorSumReport:
    """Residual of ``f1 (x) f2`` for the 2D truncation with the separable step
    potential ``A_m + B_n``, ``A_m = B_m = alpha/2`` for m >= 0, ``beta/2``
    otherwise.  ``f1``, ``f2`` are the 1D step-operator witnesses for ``lam1``
    (hopping g) and ``lam2`` (hopping h).  Residuals are absolute."""
    sites = np.arange(-N, N + 1)
    a, b = alpha / 2, beta / 2
    step = np.where(sites >= 0, a, b).astype(float)
    f1, _ = _step_vector(g, a, b, lam1, sites, split=0)
    f2, _ = _step_vector(h, a, b, lam2, sites, split=0)
    f1 /= np.linalg.norm(f1)
    f2 /= np.linalg.norm(f2)
    H1 = hopping_matrix(g, len(sites)) + np.diag(step)
    H2 = hopping_matrix(h, len(sites)) + np.diag(step)
    r1 = np.linalg.norm(H1 @ f1 - lam1 * f1)
    r2 = np.linalg.norm(H2 @ f2 - lam2 * f2)
    F = np.outer(f1, f2)
    V = step[:, None] + step[None, :]
    lam = complex(lam1) + complex(lam2)
    R = apply_anderson_2d(F, g, h, V) - lam * F
    return TensorSumReport(
        eigenvalue=lam,
        residual=float(np.linalg.norm(R)),
        residual_1=float(r1),
        residual_2=float(r2),
        bound=float(r1 * np.linalg.norm(f2) + np.linalg.norm(f1) * r2),
        product_norm=float(np.linalg.norm(F)),
    )


def periodic_free_spectrum(g, N):
    """Exact eigenvalues of the potential-free periodic truncation on 2N+1 sites."""
    k = np.arange(2 * N + 1)
    return EllipseEF.hopping(g).point(2 * np.pi * k / (2 * N + 1))


__all__ = [
    "DIRICHLET",
    "PERIODIC",
    "EllipseEF",
    "Membership",
    "ellipse_membership",
    "ellipse_membership_roots",
    "inclusion_bound_hull",
    "inclusion_bound_tube",
    "distance_to_ellipse",
    "hole_radius",
    "minkowski_sum_contains",
    "inclusion_report",
    "dirichlet_symmetrized",
    "dirichlet_realness",
    "pseudospectrum_grid",
    "PseudospectrumGrid",
    "k_eigenvector",
    "bv_eigenvector",
    "variance_functional",
    "tensor_sum_check",
    "apply_anderson_2d",
    "periodic_free_spectrum",
]
