"""Expression-matrix ingestion: loading, exon aggregation, biotype and
low-expression filtering, QC statistics, and highly-variable-gene selection.

Matrices are genes-as-rows; values are log2(RPKM+1)-style non-negative reals.
All operations return new objects; inputs are never mutated.
"""

import csv
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import EmptyResultError, ParseError, ValidationError


class Level(Enum):
    EXON = "exon"
    GENE = "gene"


@dataclass
class ExpressionMatrix:
    values: np.ndarray  # (genes, samples)
    gene_ids: list[str]
    sample_ids: list[str]
    level: Level = Level.GENE

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.gene_ids), len(self.sample_ids)):
            raise ValidationError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.gene_ids)} genes x {len(self.sample_ids)} samples")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("matrix contains non-finite values")
        if np.any(self.values < 0):
            raise ValidationError("matrix contains negative values")


@dataclass
class ProbeMap:
    entries: dict[str, str]

    def __post_init__(self):
        bad = [k for k, v in self.entries.items() if not v]
        if bad:
            raise ValidationError(f"probe map has empty gene symbols for {bad[:5]}")


@dataclass
class GeneAnnotation:
    entries: dict[str, str]  # gene symbol -> biotype


@dataclass
class SampleQCReport:
    library_sizes: np.ndarray
    sample_correlation: np.ndarray
    flagged_zero_variance: list[str] = field(default_factory=list)


@dataclass
class DropReport:
    dropped: list[str]
    reason: str


def load_expression_matrix(path, orientation: str = "genes_rows",
                           level: Level = Level.EXON) -> ExpressionMatrix:
    """Read a TSV with a sample-id header row and probe/gene ids in the first
    column. orientation='samples_rows' transposes after load."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        if len(header) < 2:
            raise ParseError(f"{path}: header row has no sample columns")
        sample_ids = [h.strip() for h in header[1:]]
        if len(set(sample_ids)) != len(sample_ids):
            dupes = sorted({s for s in sample_ids if sample_ids.count(s) > 1})
            raise ValidationError(f"{path}: duplicate sample ids {dupes}")
        gene_ids = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {lineno} has {len(row)} fields, "
                    f"expected {len(header)}")
            gene_ids.append(row[0].strip())
            vals = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell {cell!r} at line {lineno}, "
                        f"column {col} (sample {sample_ids[col - 2]!r})")
                if not np.isfinite(v):
                    raise ParseError(
                        f"{path}: non-finite cell at line {lineno}, column {col}")
                vals.append(v)
            rows.append(vals)
    values = np.array(rows, dtype=float) if rows else np.zeros((0, len(sample_ids)))
    m = ExpressionMatrix(values, gene_ids, sample_ids, level)
    if orientation == "samples_rows":
        m = ExpressionMatrix(m.values.T, m.sample_ids, m.gene_ids, level)
    return m


def aggregate_exons(m: ExpressionMatrix, pm: ProbeMap):
    """Average exon probe rows per mapped gene; unmapped probes are dropped
    and reported."""
    if m.level != Level.EXON:
        raise ValidationError("aggregate_exons expects an exon-level matrix")
    groups: dict[str, list[int]] = {}
    dropped = []
    for i, probe in enumerate(m.gene_ids):
        gene = pm.entries.get(probe)
        if gene is None:
            dropped.append(probe)
        else:
            groups.setdefault(gene, []).append(i)
    if not groups:
        raise EmptyResultError("no probes map to any gene")
    gene_ids = []
    seen = set()
    for probe in m.gene_ids:  # preserve first-appearance order
        gene = pm.entries.get(probe)
        if gene is not None and gene not in seen:
            seen.add(gene)
            gene_ids.append(gene)
    values = np.vstack([m.values[groups[g]].mean(axis=0) for g in gene_ids])
    out = ExpressionMatrix(values, gene_ids, list(m.sample_ids), Level.GENE)
    return out, DropReport(dropped, "probe absent from probe map")


def filter_protein_coding(m: ExpressionMatrix, ann: GeneAnnotation):
    if m.level != Level.GENE:
        raise ValidationError("filter_protein_coding expects gene level")
    keep = []
    dropped = []
    for i, g in enumerate(m.gene_ids):
        biotype = ann.entries.get(g)
        if biotype == "protein-coding":
            keep.append(i)
        else:
            dropped.append(g)
    if not keep:
        raise EmptyResultError("no protein-coding genes remain")
    out = ExpressionMatrix(m.values[keep], [m.gene_ids[i] for i in keep],
                           list(m.sample_ids), Level.GENE)
    return out, DropReport(dropped, "not protein-coding or missing annotation")


def qc_stats(m: ExpressionMatrix) -> SampleQCReport:
    """Per-sample library sizes and the pairwise Pearson correlation matrix
    across genes; zero-variance samples get correlation 0 and are flagged."""
    if len(m.sample_ids) < 2 or len(m.gene_ids) < 2:
        raise ValidationError("qc_stats needs at least 2 genes and 2 samples")
    sizes = m.values.sum(axis=0)
    corr, flagged_idx = _pearson_columns(m.values)
    flagged = [m.sample_ids[j] for j in flagged_idx]
    return SampleQCReport(sizes, corr, flagged)


def _pearson_columns(x: np.ndarray):
    """Pearson correlation between columns, zero-variance columns mapped to
    r=0 off-diagonal."""
    centered = x - x.mean(axis=0, keepdims=True)
    std = centered.std(axis=0)
    flagged = [int(j) for j in np.nonzero(std == 0)[0]]
    safe = np.where(std == 0, 1.0, std)
    z = centered / safe
    corr = (z.T @ z) / x.shape[0]
    for j in flagged:
        corr[j, :] = 0.0
        corr[:, j] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    corr = (corr + corr.T) / 2.0
    return corr, flagged


def filter_low_expression(m: ExpressionMatrix, threshold: float = 0.5):
    """Keep genes whose mean expression is >= threshold (boundary kept)."""
    if m.level != Level.GENE:
        raise ValidationError("filter_low_expression expects gene level")
    means = m.values.mean(axis=1)
    keep = [i for i in range(len(m.gene_ids)) if means[i] >= threshold]
    if not keep:
        raise EmptyResultError(
            f"no genes have mean expression >= {threshold}")
    out = ExpressionMatrix(m.values[keep], [m.gene_ids[i] for i in keep],
                           list(m.sample_ids), Level.GENE)
    dropped = [m.gene_ids[i] for i in range(len(m.gene_ids)) if i not in set(keep)]
    return out, DropReport(dropped, f"mean expression below {threshold}")


def select_hvg(m: ExpressionMatrix, n: int = 2000) -> ExpressionMatrix:
    """Top-n genes by population variance, descending; ties broken by
    gene id."""
    if len(m.gene_ids) < 1:
        raise ValidationError("select_hvg needs at least one gene")
    variances = m.values.var(axis=1)  # population variance across samples
    order = sorted(range(len(m.gene_ids)),
                   key=lambda i: (-variances[i], m.gene_ids[i]))
    top = order[:min(n, len(order))]
    return ExpressionMatrix(m.values[top], [m.gene_ids[i] for i in top],
                            list(m.sample_ids), m.level)


def write_matrix_tsv(m: ExpressionMatrix, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["gene_id"] + list(m.sample_ids))
        for i, g in enumerate(m.gene_ids):
            writer.writerow([g] + [repr(float(v)) for v in m.values[i]])


def load_probe_map(path) -> ProbeMap:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty probe map")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError(f"{path}: line {lineno} needs 2 columns")
            entries[row[0].strip()] = row[1].strip()
    return ProbeMap(entries)


def load_gene_annotation(path) -> GeneAnnotation:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty annotation table")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError(f"{path}: line {lineno} needs 2 columns")
            entries[row[0].strip()] = row[1].strip()
    return GeneAnnotation(entries)
