"""Monte Carlo statistics of projection norms over the tridiagonal ensemble."""

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateEigenvalues, InsufficientData, NonConvergence
from .instability import HALF_LIST_RULE, half_list_from_norms, projection_norms_gram
from .linalg_core import eigendecompose
from .models import EnsembleSpec, sample_tridiagonal
from .rng import sibling_seed

SCHEMA_VERSION = 1
PERCENTILE_RULE = "ceil(r*M/100)-th smallest value, 1-based"
TWO_RUN_SEEDS = "seed and seed XOR 1"
MEDIAN_RULE = "average over the two runs of each run's 50th percentile"


class ShapeWarning(UserWarning):
    """Shape correlation requested for a constant vector."""


@dataclass(frozen=True)
class RunRecord:
    sample_index: int
    instability_index: float
    half_list_index: float
    sorted_log_norms: np.ndarray
    excluded: Optional[str] = None

    @property
    def ok(self):
        return self.excluded is None


def evaluate_sample(spec: EnsembleSpec, sample_index: int) -> RunRecord:
    A = sample_tridiagonal(spec, sample_index)
    try:
        es = eigendecompose(A)
        pn = projection_norms_gram(es)
    except NonConvergence:
        return RunRecord(sample_index, math.nan, math.nan, np.empty(0), "non-convergent")
    except DegenerateEigenvalues:
        return RunRecord(sample_index, math.nan, math.nan, np.empty(0), "degenerate")
    return RunRecord(
        sample_index,
        float(pn.sorted_norms[-1]),
        half_list_from_norms(pn.sorted_norms),
        np.log(pn.sorted_norms),
    )


def run_ensemble(spec: EnsembleSpec, threads: int = 1) -> list:
    """One record per sample, in sample order regardless of ``threads``."""
    indices = range(spec.M)
    if threads <= 1:
        return [evaluate_sample(spec, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: evaluate_sample(spec, i), indices, chunksize=64))


def usable(records):
    return [r for r in records if r.ok]


def exclusion_counts(records):
    counts = {}
    for r in records:
        if not r.ok:
            counts[r.excluded] = counts.get(r.excluded, 0) + 1
    return counts


def percentile(values, r):
    """Order statistic number ceil(r M / 100) (1-based) of the sorted values."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise InsufficientData("percentile of an empty list")
    if not 0 <= r <= 100:
        raise ValueError("r must lie in [0, 100]")
    k = max(math.ceil(r * v.size / 100), 1)
    return float(v[k - 1])


def relative_difference(p1, p2):
    """``|p1 - p2|`` as a proportion of the two-run average."""
    mean = (p1 + p2) / 2
    return abs(p1 - p2) / mean if mean else 0.0


def two_run_percentiles(spec, percentiles, threads=1, records=None):
    """Average and relative difference of percentiles over runs with seeds
    ``seed`` and ``seed ^ 1``.  Returns ``(P, D, (records1, records2))``."""
    rec1 = run_ensemble(spec, threads) if records is None else records
    rec2 = run_ensemble(spec.with_seed(sibling_seed(spec.seed)), threads)
    i1 = [r.instability_index for r in usable(rec1)]
    i2 = [r.instability_index for r in usable(rec2)]
    P, D = {}, {}
    for r in percentiles:
        p1, p2 = percentile(i1, r), percentile(i2, r)
        P[r] = (p1 + p2) / 2
        D[r] = relative_difference(p1, p2)
    return P, D, (rec1, rec2)


def two_run_difference(spec, r, threads=1):
    return two_run_percentiles(spec, [r], threads)[1][r]


def log_norm_matrix(records):
    rows = [r.sorted_log_norms for r in usable(records)]
    if not rows:
        raise InsufficientData("no usable records")
    return np.vstack(rows)


def covariance_spectrum(records, centered=False):
    """Eigenvalues (ascending) and sign-fixed leading eigenvector of
    ``C[m, n] = E[X_m X_n]`` over usable records.

    ``centered=True`` subtracts the sample mean first; the default is the raw
    second-moment matrix.
    """
    X = log_norm_matrix(records)
    M, N = X.shape
    if M < N:
        raise InsufficientData(f"{M} usable records for a {N}x{N} covariance")
    if centered:
        X = X - X.mean(axis=0)
    C = X.T @ X / M
    lam, vecs = np.linalg.eigh(C)
    v = vecs[:, -1]
    if v.sum() < 0:
        v = -v
    return lam, v


def spectral_ratio(lam):
    """lambda_{N-1} / lambda_N of an ascending eigenvalue list."""
    return float(max(lam[-2], 0.0) / lam[-1]) if lam[-1] > 0 else 0.0


def leading_vector_shape(v):
    """Pearson correlation of ``v`` with 1, 2, ..., N.

    A constant vector has no defined correlation; 0 is returned and a
    :class:`ShapeWarning` issued.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("zero vector")
    if np.ptp(v) == 0:
        warnings.warn("constant vector: correlation undefined, returning 0", ShapeWarning)
        return 0.0
    return float(np.corrcoef(v, np.arange(1, len(v) + 1))[0, 1])


def pooled_median(records):
    """Median of all projection norms of all usable records in one list."""
    return percentile(np.exp(log_norm_matrix(records)), 50)


def half_list_median(records):
    return percentile([r.half_list_index for r in usable(records)], 50)


def two_run_medians(rec1, rec2):
    """Half-list and pooled medians averaged over the two runs, matching the
    two-run convention used for percentiles."""
    j = (half_list_median(rec1) + half_list_median(rec2)) / 2
    pooled = (pooled_median(rec1) + pooled_median(rec2)) / 2
    return j, pooled


@dataclass
class StatsReport:
    spec: EnsembleSpec
    P: dict
    D: dict
    half_list_median: float
    pooled_median: float
    covariance_eigenvalues: list
    mu: float
    leading_vector: list
    leading_vector_correlation: float
    excluded: dict
    usable: int
    centered: bool = False
    wall_time: Optional[float] = field(default=None, compare=False)

    def to_dict(self):
        """JSON-ready mapping. Wall time is left to the run manifest."""
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": asdict(self.spec),
            "percentiles": {_key(r): v for r, v in self.P.items()},
            "two_run_difference": {_key(r): v for r, v in self.D.items()},
            "log_percentile_over_N": {_key(r): math.log(v) / self.spec.N for r, v in self.P.items()},
            "half_list_median": self.half_list_median,
            "pooled_median": self.pooled_median,
            "covariance": {
                "centered": self.centered,
                "eigenvalues_ascending": list(self.covariance_eigenvalues),
                "mu": self.mu,
                "leading_vector": list(self.leading_vector),
                "leading_vector_correlation": self.leading_vector_correlation,
            },
            "usable_samples": self.usable,
            "excluded": dict(sorted(self.excluded.items())),
            "conventions": {
                "percentile": PERCENTILE_RULE,
                "half_list": HALF_LIST_RULE,
                "two_run_seeds": TWO_RUN_SEEDS,
                "medians": MEDIAN_RULE,
            },
        }


def _key(r):
    return str(int(r)) if float(r).is_integer() else repr(float(r))


def build_report(spec, percentiles=(50, 95), threads=1, centered=False):
    """Full statistics for one ensemble: two-run percentiles and medians plus
    the covariance analysis on the first run."""
    t0 = time.perf_counter()
    P, D, (rec1, rec2) = two_run_percentiles(spec, percentiles, threads)
    lam, v = covariance_spectrum(rec1, centered=centered)
    j_median, p_median = two_run_medians(rec1, rec2)
    excluded = exclusion_counts(rec1)
    excluded2 = exclusion_counts(rec2)
    merged = {k: excluded.get(k, 0) + excluded2.get(k, 0) for k in set(excluded) | set(excluded2)}
    return StatsReport(
        spec=spec,
        P=P,
        D=D,
        half_list_median=j_median,
        pooled_median=p_median,
        covariance_eigenvalues=[float(x) for x in lam],
        mu=spectral_ratio(lam),
        leading_vector=[float(x) for x in v],
        leading_vector_correlation=leading_vector_shape(v),
        excluded=merged,
        usable=len(usable(rec1)) + len(usable(rec2)),
        centered=centered,
        wall_time=time.perf_counter() - t0,
    ), (rec1, rec2)
