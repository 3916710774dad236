"""
Behavioural clustering of accounts by the state-action pairs they visit

Indicator features are projected with a two-component PCA (covariance
eigendecomposition by cyclic Jacobi rotations) and grouped with k-means.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from behavior_tools.sequence import PAIR_SYMBOLS
from evaluation.metrics import empirical_cdf
from trollscope.exceptions import EmptyInputError, InvariantViolationError, ValidationError
from trollscope.models import (
    AccountClass,
    AccountSequence,
    ClusterReport,
    ClusterRow,
    ClusterSummary,
    IndicatorVector,
    N_PAIR_SYMBOLS,
)
from utils import write_frame

logger = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
KMEANS_MAX_ITER = 100
DOMINANT_RATE = 0.5


def indicator_features(sequences: Mapping[str, AccountSequence]) -> List[IndicatorVector]:
    """One 11-bit visited-pair vector per account, in input order"""
    vectors = []
    for account_id, seq in sequences.items():
        bits = np.zeros(N_PAIR_SYMBOLS, dtype=np.int64)
        bits[seq.codes()] = 1
        vectors.append(IndicatorVector(account_id=account_id, bits=bits.tolist()))
    return vectors


def indicator_matrix(vectors: Sequence[IndicatorVector]) -> np.ndarray:
    return np.array([v.bits for v in vectors], dtype=np.float64).reshape(len(vectors), N_PAIR_SYMBOLS)


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a) - np.sum(np.diag(a) ** 2)))


def jacobi_eigh(
    matrix: np.ndarray,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations

    Args:
        matrix: Symmetric (d, d) matrix
        tol: Stop once the off-diagonal Frobenius norm falls below this
        max_sweeps: Upper bound on full sweeps over the (p, q) pairs

    Returns:
        (eigenvalues descending, eigenvectors as columns); each eigenvector's
        largest-magnitude entry is positive
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    d = a.shape[0]
    v = np.eye(d)

    for sweep in range(max_sweeps):
        if _off_diagonal_norm(a) < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0

                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_diagonal_norm(a) >= tol:
            logger.warning(f"Jacobi stopped after {max_sweeps} sweeps above tolerance {tol}")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values, v = values[order], v[:, order]
    for j in range(d):
        if v[np.argmax(np.abs(v[:, j])), j] < 0:
            v[:, j] = -v[:, j]
    return values, v


@dataclass
class PcaResult:
    projections: np.ndarray            # (n, n_components)
    components: np.ndarray             # (n_components, d), orthonormal rows
    explained_variance: np.ndarray     # (n_components,)
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eigenvectors: Optional[np.ndarray] = None


def pca_project(vectors, n_components: int = 2) -> PcaResult:
    """
    Project mean-centred vectors onto the top covariance eigenvectors

    Raises:
        EmptyInputError: With fewer than two vectors
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise EmptyInputError("PCA needs at least two vectors")
    if not 1 <= n_components <= x.shape[1]:
        raise ValidationError(f"n_components must be in [1, {x.shape[1]}], got {n_components}")

    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (len(x) - 1)
    values, vecs = jacobi_eigh(cov)
    values = np.clip(values, 0.0, None)

    components = vecs[:, :n_components].T
    total = values.sum()
    ratio = values[:n_components] / total if total > 0 else np.zeros(n_components)
    return PcaResult(
        projections=centred @ components.T,
        components=components,
        explained_variance=values[:n_components],
        explained_variance_ratio=ratio,
        mean=mean,
        eigenvalues=values,
        eigenvectors=vecs,
    )


@dataclass
class KMeansResult:
    assignment: np.ndarray
    centroids: np.ndarray
    inertia_history: List[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1] if self.inertia_history else 0.0


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, np.newaxis, :] - centroids[np.newaxis, :, :]
    return np.sum(diff * diff, axis=2)


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability proportional to D^2"""
    n = len(points)
    centroids = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = _sq_distances(points, np.array(centroids)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids.append(points[idx])
    return np.array(centroids, dtype=np.float64)


def kmeans(points, k: int = 3, rng_seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """
    Lloyd's algorithm from k-means++ seeds

    Iterates until the assignment stops changing or max_iter is reached. A
    cluster that loses all members keeps its previous centroid.

    Raises:
        ValidationError: If k is not in [1, #points]
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    if not 1 <= k <= len(points):
        raise ValidationError(f"k={k} must be between 1 and the number of points ({len(points)})", field="k")

    rng = np.random.default_rng(rng_seed)
    centroids = kmeans_pp_init(points, k, rng)
    assignment = None
    history: List[float] = []
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        d2 = _sq_distances(points, centroids)
        new_assignment = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(points)), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = points[assignment == j]
            if len(members):
                centroids[j] = members.mean(axis=0)

    if any(b > a + 1e-9 * max(1.0, a) for a, b in zip(history, history[1:])):
        raise InvariantViolationError("k-means inertia increased between iterations")
    logger.debug(f"k-means converged after {n_iter} iterations, inertia {history[-1]:.6f}")
    return KMeansResult(assignment=assignment, centroids=centroids, inertia_history=history, n_iter=n_iter)


def cluster_purity(assignment, truth) -> float:
    """Fraction of points belonging to their cluster's majority group"""
    assignment = np.asarray(assignment)
    truth = np.asarray(truth)
    total = 0
    for cluster in np.unique(assignment):
        _, counts = np.unique(truth[assignment == cluster], return_counts=True)
        total += counts.max()
    return total / len(assignment)


def cluster_report(
    account_ids: Sequence[str],
    assignment,
    labels: Optional[Mapping[str, AccountClass]] = None,
    troll_scores: Optional[Mapping[str, float]] = None,
    projections: Optional[np.ndarray] = None,
    indicators: Optional[np.ndarray] = None,
    explained_variance: Optional[Sequence[float]] = None,
) -> ClusterReport:
    """
    Per-cluster class composition, visited-pair profile and Troll Score CDFs

    Args:
        account_ids: Accounts in the order of the assignment
        assignment: Cluster id per account
        labels: Account classes (accounts without one are counted in neither class)
        troll_scores: Troll Score per account, when available
        projections: (n, 2) PCA coordinates
        indicators: (n, 11) visited-pair indicators
        explained_variance: Variance along the projected components

    Returns:
        ClusterReport
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    labels = labels or {}
    troll_scores = troll_scores or {}
    if len(account_ids) != len(assignment):
        raise ValidationError("assignment must align with account ids")

    rows = []
    for i, account_id in enumerate(account_ids):
        pc = projections[i] if projections is not None else (0.0, 0.0)
        rows.append(ClusterRow(
            account_id=account_id,
            pc1=float(pc[0]),
            pc2=float(pc[1]) if len(pc) > 1 else 0.0,
            cluster=int(assignment[i]),
            label=labels.get(account_id),
            troll_score=troll_scores.get(account_id),
        ))

    total_pos = sum(1 for r in rows if r.label is AccountClass.POSITIVE)
    total_neg = sum(1 for r in rows if r.label is AccountClass.NEGATIVE)

    clusters = []
    for cluster in sorted(set(assignment.tolist())):
        idx = np.flatnonzero(assignment == cluster)
        members = [rows[i] for i in idx]
        n_pos = sum(1 for r in members if r.label is AccountClass.POSITIVE)
        n_neg = sum(1 for r in members if r.label is AccountClass.NEGATIVE)

        summary = ClusterSummary(
            cluster=cluster,
            n_accounts=len(members),
            n_positive=n_pos,
            n_negative=n_neg,
            pct_of_positive=100.0 * n_pos / total_pos if total_pos else 0.0,
            pct_of_negative=100.0 * n_neg / total_neg if total_neg else 0.0,
        )
        if indicators is not None:
            rates = np.asarray(indicators, dtype=np.float64)[idx].mean(axis=0)
            summary.visit_rates = [float(r) for r in rates]
            summary.dominant_pairs = [str(PAIR_SYMBOLS[c]) for c in np.flatnonzero(rates >= DOMINANT_RATE)]

        pos_scores = [r.troll_score for r in members if r.label is AccountClass.POSITIVE and r.troll_score is not None]
        neg_scores = [r.troll_score for r in members if r.label is AccountClass.NEGATIVE and r.troll_score is not None]
        if pos_scores:
            summary.positive_cdf = empirical_cdf(pos_scores)
        if neg_scores:
            summary.negative_cdf = empirical_cdf(neg_scores)
        clusters.append(summary)

    return ClusterReport(
        rows=rows,
        clusters=clusters,
        explained_variance=[float(v) for v in (explained_variance if explained_variance is not None else [])],
    )


def projection_frame(report: ClusterReport) -> pd.DataFrame:
    rows = [
        (
            r.account_id,
            r.pc1,
            r.pc2,
            r.cluster,
            r.label.value if r.label else "",
            "" if r.troll_score is None else r.troll_score,
        )
        for r in report.rows
    ]
    return pd.DataFrame(rows, columns=["account_id", "pc1", "pc2", "cluster", "label", "troll_score"])


def summary_frame(report: ClusterReport) -> pd.DataFrame:
    rows = []
    for c in report.clusters:
        row = {
            "cluster": c.cluster,
            "n_accounts": c.n_accounts,
            "n_positive": c.n_positive,
            "n_negative": c.n_negative,
            "pct_of_positive": c.pct_of_positive,
            "pct_of_negative": c.pct_of_negative,
            "dominant_pairs": " ".join(c.dominant_pairs),
        }
        for code, rate in enumerate(c.visit_rates):
            row[f"visit_{code}"] = rate
        rows.append(row)
    return pd.DataFrame(rows)


def cluster_cdf_frame(report: ClusterReport) -> pd.DataFrame:
    """Long table `cluster,class,x,cdf`"""
    rows = []
    for c in report.clusters:
        for name, points in ((AccountClass.POSITIVE.value, c.positive_cdf), (AccountClass.NEGATIVE.value, c.negative_cdf)):
            rows.extend((c.cluster, name, p.x, p.cdf) for p in points)
    return pd.DataFrame(rows, columns=["cluster", "class", "x", "cdf"])


def write_cluster_report(report: ClusterReport, out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    return {
        "projection": write_frame(projection_frame(report), out_dir / "cluster_projection.csv"),
        "summary": write_frame(summary_frame(report), out_dir / "cluster_summary.csv"),
        "cdf": write_frame(cluster_cdf_frame(report), out_dir / "cluster_cdf.csv"),
    }
