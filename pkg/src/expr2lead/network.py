"""Weighted co-expression network: soft-threshold adjacency, scale-free fit
scan, module detection, eigengenes, intramodular connectivity, and biomarker
ranking."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .errors import ValidationError
from .expr import ExpressionMatrix, _pearson_columns

log = logging.getLogger(__name__)

SCALE_FREE_R2_TARGET = 0.85
SCALE_FREE_BINS = 10
DEFAULT_CUT_HEIGHT = 0.75
DEFAULT_MIN_MODULE_SIZE = 5
POWER_ITER_TOL = 1e-10
POWER_ITER_MAX = 10_000


@dataclass
class GeneCorrMatrix:
    r: np.ndarray
    gene_ids: list[str]
    flagged_zero_variance: list[str] = field(default_factory=list)


@dataclass
class AdjacencyMatrix:
    a: np.ndarray
    beta: int
    gene_ids: list[str]


@dataclass
class BetaScanRecord:
    beta: int
    r_squared: float
    mean_connectivity: float
    degenerate: bool = False


@dataclass
class BetaScan:
    records: list[BetaScanRecord]
    recommended_beta: int
    met_target: bool


@dataclass
class ModuleSet:
    modules: list[set[str]]
    labels: dict[str, int]  # gene -> module index, -1 for unassigned
    unassigned: set[str]


@dataclass
class Eigengene:
    values: np.ndarray  # per-sample scores
    explained_variance_fraction: float
    module_label: int = -1


@dataclass
class BiomarkerEntry:
    gene_id: str
    module_label: int
    k_within: float
    rank: int = 0


@dataclass
class BiomarkerRanking:
    entries: list[BiomarkerEntry]


def correlation_matrix(m: ExpressionMatrix) -> GeneCorrMatrix:
    """Gene-gene Pearson correlations across samples."""
    if len(m.sample_ids) < 3:
        raise ValidationError("correlation_matrix needs at least 3 samples")
    corr, flagged_idx = _pearson_columns(m.values.T)
    flagged = [m.gene_ids[i] for i in flagged_idx]
    if flagged:
        log.warning("zero-variance genes flagged in correlation: %s",
                    flagged[:10])
    return GeneCorrMatrix(corr, list(m.gene_ids), flagged)


def adjacency(c: GeneCorrMatrix, beta: int) -> AdjacencyMatrix:
    """a_ij = |r_ij| ** beta off-diagonal; self-loops removed."""
    if beta < 1:
        raise ValidationError(f"beta must be >= 1, got {beta}")
    a = np.abs(c.r) ** beta
    np.fill_diagonal(a, 0.0)
    return AdjacencyMatrix(a, beta, list(c.gene_ids))


def _scale_free_r2(k: np.ndarray):
    """Signed R² of log10 p(k) vs log10 k over log-spaced connectivity bins;
    negated when the slope is positive. Returns (r2, degenerate)."""
    k = k[k > 0]
    if k.size < 2 or np.allclose(k, k[0]):
        return 0.0, True
    edges = np.logspace(np.log10(k.min()), np.log10(k.max()),
                        SCALE_FREE_BINS + 1)
    edges[-1] *= 1.0 + 1e-12
    counts, _ = np.histogram(k, bins=edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    mask = counts > 0
    if mask.sum() < 3:
        return 0.0, True
    x = np.log10(centers[mask])
    y = np.log10(counts[mask] / counts.sum())
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 0.0, True
    r2 = 1.0 - ss_res / ss_tot
    return (-r2 if slope > 0 else r2), False


def soft_threshold_scan(c: GeneCorrMatrix, betas) -> BetaScan:
    if not betas:
        raise ValidationError("beta list must be non-empty")
    records = []
    for beta in betas:
        a = adjacency(c, beta).a
        k = a.sum(axis=1)
        r2, degenerate = _scale_free_r2(k)
        records.append(BetaScanRecord(beta, r2, float(k.mean()), degenerate))
    passing = [r for r in records if r.r_squared > SCALE_FREE_R2_TARGET]
    if passing:
        rec = min(passing, key=lambda r: r.beta)
        met = True
    else:
        rec = max(records, key=lambda r: r.r_squared)
        met = False
        log.warning("no beta reached R^2 > %.2f; best is beta=%d (R^2=%.3f)",
                    SCALE_FREE_R2_TARGET, rec.beta, rec.r_squared)
    return BetaScan(records, rec.beta, met)


def detect_modules(a: AdjacencyMatrix, min_size: int = DEFAULT_MIN_MODULE_SIZE,
                   cut: float = DEFAULT_CUT_HEIGHT) -> ModuleSet:
    """Average-linkage hierarchical clustering on 1 - a, cut at `cut`;
    clusters below min_size go to unassigned."""
    if min_size < 2:
        raise ValidationError("min_size must be >= 2")
    n = len(a.gene_ids)
    d = 1.0 - a.a
    np.fill_diagonal(d, 0.0)
    d = np.clip((d + d.T) / 2.0, 0.0, None)
    if n < 2:
        labels_arr = np.ones(n, dtype=int)
    else:
        z = linkage(squareform(d, checks=False), method="average")
        labels_arr = fcluster(z, t=cut, criterion="distance")
    clusters: dict[int, set[str]] = {}
    for gene, lab in zip(a.gene_ids, labels_arr):
        clusters.setdefault(int(lab), set()).add(gene)
    modules = []
    unassigned = set()
    for lab in sorted(clusters, key=lambda l: (-len(clusters[l]),
                                               min(clusters[l]))):
        if len(clusters[lab]) >= min_size:
            modules.append(clusters[lab])
        else:
            unassigned |= clusters[lab]
    labels = {}
    for idx, mod in enumerate(modules):
        for g in mod:
            labels[g] = idx
    for g in unassigned:
        labels[g] = -1
    return ModuleSet(modules, labels, unassigned)


def module_eigengene(m: ExpressionMatrix, module: set[str],
                     label: int = -1) -> Eigengene:
    """PC1 of the per-gene z-scored submatrix via power iteration on the
    sample covariance; sign fixed to correlate non-negatively with the
    module mean profile."""
    idx = [i for i, g in enumerate(m.gene_ids) if g in module]
    if len(idx) < 2:
        raise ValidationError("module_eigengene needs at least 2 genes")
    x = m.values[idx]
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    std = np.where(std == 0, 1.0, std)
    z = (x - mean) / std
    cov = (z.T @ z) / max(len(idx) - 1, 1)
    v, lam = _power_iteration(cov)
    total = float(np.trace(cov))
    frac = float(lam / total) if total > 0 else 0.0
    mean_profile = z.mean(axis=0)
    if float(np.dot(v, mean_profile)) < 0:
        v = -v
    return Eigengene(v, frac, label)


def _power_iteration(cov: np.ndarray):
    n = cov.shape[0]
    # deterministic start biased toward the dominant direction
    v = cov.sum(axis=1)
    if np.linalg.norm(v) < 1e-300:
        v = np.ones(n)
    v = v / np.linalg.norm(v)
    lam = 0.0
    # shift to make the dominant eigenvalue of cov + shift*I the largest in
    # magnitude even if cov has negative eigenvalues (it is PSD, so shift=0)
    for _ in range(POWER_ITER_MAX):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return v, 0.0
        w = w / norm
        new_lam = float(w @ cov @ w)
        if np.linalg.norm(w - v) < POWER_ITER_TOL or \
                np.linalg.norm(w + v) < POWER_ITER_TOL:
            return w, new_lam
        v, lam = w, new_lam
    return v, lam


def intramodular_connectivity(a: AdjacencyMatrix,
                              mods: ModuleSet) -> BiomarkerRanking:
    """k_within(g) = sum of adjacency to same-module genes; unassigned genes
    get 0."""
    index = {g: i for i, g in enumerate(a.gene_ids)}
    entries = []
    for g in a.gene_ids:
        if g not in mods.labels:
            raise ValidationError(f"gene {g} missing from module labels")
        lab = mods.labels[g]
        if lab < 0:
            entries.append(BiomarkerEntry(g, -1, 0.0))
            continue
        members = [index[h] for h in mods.modules[lab] if h != g]
        k = float(a.a[index[g], members].sum()) if members else 0.0
        entries.append(BiomarkerEntry(g, lab, k))
    entries.sort(key=lambda e: (-e.k_within, e.gene_id))
    for r, e in enumerate(entries, start=1):
        e.rank = r
    return BiomarkerRanking(entries)


def rank_biomarkers(raw: BiomarkerRanking, exclusions=("HB",),
                    k: int = 20) -> BiomarkerRanking:
    """Drop genes whose symbol starts with an exclusion prefix, keep top k
    by k_within (ties by gene id)."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    kept = [e for e in raw.entries
            if not any(e.gene_id.startswith(p) for p in exclusions)]
    kept.sort(key=lambda e: (-e.k_within, e.gene_id))
    if len(kept) < k:
        log.warning("only %d biomarkers survive exclusions (requested %d)",
                    len(kept), k)
    top = kept[:k]
    out = [BiomarkerEntry(e.gene_id, e.module_label, e.k_within, r)
           for r, e in enumerate(top, start=1)]
    return BiomarkerRanking(out)


def eigengene_correlation(eigs: list[Eigengene]) -> np.ndarray:
    if len(eigs) < 2:
        raise ValidationError("need at least 2 eigengenes")
    lengths = {len(e.values) for e in eigs}
    if len(lengths) != 1:
        raise ValidationError(f"eigengene sample counts differ: {lengths}")
    stacked = np.column_stack([e.values for e in eigs])
    corr, _ = _pearson_columns(stacked)
    return corr
