"""Matrix families: the random tridiagonal ensemble, the closed-form
weighted-circulant family, the B_s Toeplitz blocks and finite truncations of
the non-self-adjoint Anderson model in one and two dimensions."""

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng

DIRICHLET = "dirichlet"
PERIODIC = "periodic"
SITE_ORDERING_2D = "row-major: first coordinate m outer, second coordinate n inner"


@dataclass(frozen=True)
class EnsembleSpec:
    """Random tridiagonal ensemble: sub-, main and super-diagonal entries are
    independent uniforms on [0, sub_hi], [0, diag_hi], [0, super_hi]."""

    N: int
    M: int
    seed: int
    sub_hi: float = 1.0
    diag_hi: float = 2.0
    super_hi: float = 3.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be an integer >= 1, got {self.M}")
        for name in ("sub_hi", "diag_hi", "super_hi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        rng.check_seed(self.seed)

    def with_seed(self, seed):
        return EnsembleSpec(self.N, self.M, seed, self.sub_hi, self.diag_hi, self.super_hi)


def sample_tridiagonal(spec: EnsembleSpec, sample_index: int) -> np.ndarray:
    """Matrix number ``sample_index`` of the ensemble.

    Draw order within a sample is: N-1 subdiagonal, N diagonal, N-1
    superdiagonal unit uniforms, each then scaled to its interval.
    """
    if not 0 <= sample_index < spec.M:
        raise IndexError(f"sample_index {sample_index} outside [0, {spec.M})")
    N = spec.N
    u = rng.stream(spec.seed, rng.ENSEMBLE, sample_index).random(3 * N - 2)
    A = np.diag(spec.diag_hi * u[N - 1:2 * N - 1])
    A += np.diag(spec.sub_hi * u[:N - 1], -1)
    A += np.diag(spec.super_hi * u[2 * N - 1:], 1)
    return A


# --- weighted circulant family A[m, n] = f(m - n) a^(m - n) -------------------

# (f(-1), f(0), f(1)); an asymmetric stencil keeps the eigenvalues
# f(0) + f(1) e^{-it} + f(-1) e^{it} distinct for distinct t
DEFAULT_STENCIL = {-1: 1.0, 0: 1.0, 1: 2.0}


def periodic_symbol(N, f):
    """Values f(0), ..., f(N-1) of an N-periodic function.

    ``f`` may be a callable, a length-N sequence, or a mapping from integer
    offsets to values; mapping keys are reduced mod N and colliding keys add
    (the periodization of a finitely supported stencil).
    """
    if callable(f):
        return np.array([f(k) for k in range(N)], dtype=complex)
    if isinstance(f, Mapping):
        out = np.zeros(N, dtype=complex)
        for k, val in f.items():
            out[int(k) % N] += val
        return out
    out = np.asarray(f, dtype=complex)
    if out.shape != (N,):
        raise ValueError(f"expected {N} periodic values, got shape {out.shape}")
    return out


def weighted_circulant(N, a, f=None):
    """``A[m, n] = f(m - n) a^(m - n)`` with ``f`` periodic of period N."""
    if not a > 1:
        raise ValueError("a must exceed 1")
    sym = periodic_symbol(N, DEFAULT_STENCIL if f is None else f)
    d = np.subtract.outer(np.arange(N), np.arange(N))
    A = sym[d % N] * float(a) ** d
    if np.all(A.imag == 0):
        A = A.real
    return A


def weighted_circulant_index(N, a):
    """Closed-form common norm of all spectral projections of the family."""
    a = float(a)
    if not a > 1:
        raise ValueError("a must exceed 1")
    return a * (a**N - a**-N) / ((a * a - 1) * N)


# --- B_s blocks -----------------------------------------------------------------

def build_Bs(s, x, y):
    """s x s matrix with ``x`` on the subdiagonal and ``y`` on the superdiagonal."""
    if s < 1:
        raise ValueError("s must be >= 1")
    return np.diag(np.full(s - 1, float(x)), -1) + np.diag(np.full(s - 1, float(y)), 1)


def bs_eigenvalues(s, x, y):
    k = np.arange(1, s + 1)
    return 2 * np.sqrt(x * y) * np.cos(np.pi * k / (s + 1))


def bs_projection_norm_closed(s, x, y, k):
    """Projection norm of eigenvalue number ``k`` of B_s from the explicit
    sine eigenvectors weighted by (x/y)^(r/2) and (y/x)^(r/2)."""
    if not 1 <= k <= s:
        raise ValueError(f"k must lie in [1, {s}]")
    r = np.arange(1, s + 1)
    sin2 = np.sin(np.pi * k * r / (s + 1)) ** 2
    ratio = abs(x / y)
    overlap = sin2.sum()
    phi2 = (sin2 * ratio**r).sum()
    psi2 = (sin2 * ratio ** (-r)).sum()
    return float(math.sqrt(phi2 * psi2) / overlap)


def bs_instability_closed(s, x, y):
    return max(bs_projection_norm_closed(s, x, y, k) for k in range(1, s + 1))


# --- Anderson truncations -------------------------------------------------------

@dataclass(frozen=True)
class PotentialLaw:
    """Uniform on [-B, B], or two-point: ``alpha`` w.p. ``p_alpha`` else ``beta``."""

    kind: str = "uniform"
    B: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    p_alpha: float = 1.0

    def __post_init__(self):
        if self.kind == "uniform":
            if self.B < 0:
                raise ValueError("B must be >= 0")
        elif self.kind == "two_point":
            if not 0 <= self.p_alpha <= 1:
                raise ValueError("p_alpha must lie in [0, 1]")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def support(self):
        """Closed interval conv(M) containing the support."""
        if self.kind == "uniform":
            return (-self.B, self.B)
        if self.p_alpha == 1:
            return (self.alpha, self.alpha)
        if self.p_alpha == 0:
            return (self.beta, self.beta)
        return (min(self.alpha, self.beta), max(self.alpha, self.beta))

    @property
    def max_abs(self):
        lo, hi = self.support
        return max(abs(lo), abs(hi))

    def sample(self, generator, size):
        u = generator.random(size)
        if self.kind == "uniform":
            return self.B * (2 * u - 1)
        return np.where(u < self.p_alpha, self.alpha, self.beta).astype(float)


@dataclass(frozen=True)
class AndersonParams:
    g: float
    N: int
    potential: PotentialLaw = PotentialLaw()
    bc: str = DIRICHLET
    seed: int = 0
    h: Optional[float] = None

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N (half width) must be an integer >= 1")
        if self.bc not in (DIRICHLET, PERIODIC):
            raise ValueError(f"bc must be {DIRICHLET!r} or {PERIODIC!r}")
        rng.check_seed(self.seed)

    @property
    def size(self):
        return 2 * self.N + 1

    @property
    def sites(self):
        return np.arange(-self.N, self.N + 1)


def hopping_matrix(g, size, bc=DIRICHLET):
    """Potential-free part: ``e^-g`` below and ``e^g`` above the diagonal."""
    H = np.diag(np.full(size - 1, math.exp(-g)), -1) + np.diag(np.full(size - 1, math.exp(g)), 1)
    if bc == PERIODIC:
        # f_{-N-1} == f_N and f_{N+1} == f_{-N}
        H[0, -1] += math.exp(-g)
        H[-1, 0] += math.exp(g)
    return H


def anderson_potential(params: AndersonParams):
    if params.h is None:
        gen = rng.stream(params.seed, rng.ANDERSON_1D)
        return params.potential.sample(gen, params.size)
    gen = rng.stream(params.seed, rng.ANDERSON_2D)
    return params.potential.sample(gen, (params.size, params.size))


def anderson_1d(params: AndersonParams) -> np.ndarray:
    """Truncation of ``e^-g f_{n-1} + e^g f_{n+1} + V_n f_n`` to sites -N..N."""
    H = hopping_matrix(params.g, params.size, params.bc)
    H[np.diag_indices_from(H)] += anderson_potential(params)
    return H


def anderson_2d(params: AndersonParams) -> np.ndarray:
    """Dirichlet truncation of the 2D model on (2N+1)^2 sites, ordered by
    ``SITE_ORDERING_2D``: ``A_g (x) I + I (x) A_h + diag(V)``."""
    if params.h is None:
        raise ValueError("2D model needs h")
    if params.bc != DIRICHLET:
        raise ValueError("2D model is built with Dirichlet boundary conditions only")
    n = params.size
    eye = np.eye(n)
    H = np.kron(hopping_matrix(params.g, n), eye) + np.kron(eye, hopping_matrix(params.h, n))
    H[np.diag_indices_from(H)] += anderson_potential(params).ravel()
    return H


def k_operator(g, alpha, beta, N):
    """Truncation to -N..N of the step operator with potential ``alpha`` on
    sites n >= 1 and ``beta`` on n <= 0 (Dirichlet ends)."""
    sites = np.arange(-N, N + 1)
    H = hopping_matrix(g, 2 * N + 1)
    H[np.diag_indices_from(H)] = np.where(sites >= 1, alpha, beta)
    return H
