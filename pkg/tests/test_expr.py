"""Expression matrix loading, aggregation, filtering, QC, and HVG
selection."""

import numpy as np
import pytest

from expr2lead.errors import EmptyResultError, ParseError, ValidationError
from expr2lead.expr import (ExpressionMatrix, GeneAnnotation, Level, ProbeMap,
                            aggregate_exons, filter_low_expression,
                            filter_protein_coding, load_expression_matrix,
                            qc_stats, select_hvg, write_matrix_tsv)


def _write(tmp_path, text, name="m.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_basic(tmp_path):
    path = _write(tmp_path, "id\tS1\tS2\nE1\t1.5\t2\nE2\t0\t3\n")
    m = load_expression_matrix(path)
    assert m.gene_ids == ["E1", "E2"]
    assert m.sample_ids == ["S1", "S2"]
    assert m.values.tolist() == [[1.5, 2.0], [0.0, 3.0]]


def test_non_numeric_cell_reports_location(tmp_path):
    path = _write(tmp_path, "id\tS1\tS2\nE1\t1.5\toops\n")
    with pytest.raises(ParseError, match="line 2"):
        load_expression_matrix(path)


def test_duplicate_sample_ids_rejected(tmp_path):
    path = _write(tmp_path, "id\tS1\tS1\nE1\t1\t2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_expression_matrix(path)


def test_samples_rows_orientation(tmp_path):
    path = _write(tmp_path, "id\tG1\tG2\nS1\t1\t2\nS2\t3\t4\n")
    m = load_expression_matrix(path, orientation="samples_rows")
    assert m.gene_ids == ["G1", "G2"]
    assert m.sample_ids == ["S1", "S2"]
    assert m.values.tolist() == [[1.0, 3.0], [2.0, 4.0]]


def test_negative_values_rejected():
    with pytest.raises(ValidationError):
        ExpressionMatrix(np.array([[-1.0]]), ["g"], ["s"])


def test_aggregate_exons_averages_probes():
    m = ExpressionMatrix(np.array([[1.0, 2.0], [3.0, 4.0], [10.0, 10.0]]),
                         ["p1", "p2", "p3"], ["s1", "s2"], Level.EXON)
    pm = ProbeMap({"p1": "GA", "p2": "GA", "p3": "GB"})
    out, report = aggregate_exons(m, pm)
    assert out.gene_ids == ["GA", "GB"]
    assert out.values.tolist() == [[2.0, 3.0], [10.0, 10.0]]
    assert report.dropped == []


def test_aggregate_drops_unmapped_probes():
    m = ExpressionMatrix(np.array([[1.0], [2.0]]), ["p1", "px"], ["s"],
                         Level.EXON)
    out, report = aggregate_exons(m, ProbeMap({"p1": "GA"}))
    assert out.gene_ids == ["GA"]
    assert report.dropped == ["px"]


def test_protein_coding_filter():
    m = ExpressionMatrix(np.ones((3, 2)), ["A", "B", "C"], ["s1", "s2"])
    ann = GeneAnnotation({"A": "protein-coding", "B": "lncRNA"})
    out, report = filter_protein_coding(m, ann)
    assert out.gene_ids == ["A"]
    assert sorted(report.dropped) == ["B", "C"]


def test_protein_coding_filter_empty_result():
    m = ExpressionMatrix(np.ones((1, 2)), ["A"], ["s1", "s2"])
    with pytest.raises(EmptyResultError):
        filter_protein_coding(m, GeneAnnotation({}))


def test_low_expression_boundary_kept():
    m = ExpressionMatrix(np.array([[0.5, 0.5], [0.4, 0.4]]), ["A", "B"],
                         ["s1", "s2"])
    out, report = filter_low_expression(m, threshold=0.5)
    assert out.gene_ids == ["A"]
    assert report.dropped == ["B"]


def test_qc_pearson_matches_formula_oracle():
    rng = np.random.RandomState(0)
    vals = rng.rand(10, 4) + 0.1
    m = ExpressionMatrix(vals, [f"g{i}" for i in range(10)],
                         [f"s{j}" for j in range(4)])
    qc = qc_stats(m)
    oracle = np.corrcoef(vals.T)
    assert np.allclose(qc.sample_correlation, oracle, atol=1e-12)
    assert np.allclose(qc.library_sizes, vals.sum(axis=0))


def test_qc_flags_zero_variance_sample():
    vals = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    m = ExpressionMatrix(vals, [f"g{i}" for i in range(5)], ["s1", "s2"])
    qc = qc_stats(m)
    assert qc.flagged_zero_variance == ["s2"]
    assert qc.sample_correlation[0, 1] == 0.0
    assert qc.sample_correlation[1, 1] == 1.0


def test_hvg_selects_by_variance_with_ties_by_id():
    vals = np.array([[0.0, 4.0], [1.0, 1.0], [0.0, 4.0]])
    m = ExpressionMatrix(vals, ["B", "A", "C"], ["s1", "s2"])
    out = select_hvg(m, n=2)
    assert out.gene_ids == ["B", "C"]  # same variance, id order


def test_hvg_brute_force_oracle():
    rng = np.random.RandomState(1)
    vals = rng.rand(50, 8)
    ids = [f"g{i:02d}" for i in range(50)]
    m = ExpressionMatrix(vals, ids, [f"s{j}" for j in range(8)])
    out = select_hvg(m, n=10)
    expected = sorted(ids, key=lambda g: (-vals[ids.index(g)].var(), g))[:10]
    assert out.gene_ids == expected


def test_write_round_trip(tmp_path):
    vals = np.array([[1.234567891234, 2.0], [0.1, 3.5]])
    m = ExpressionMatrix(vals, ["A", "B"], ["s1", "s2"])
    path = tmp_path / "out.tsv"
    write_matrix_tsv(m, path)
    back = load_expression_matrix(path, level=Level.GENE)
    assert back.gene_ids == m.gene_ids
    assert np.array_equal(back.values, m.values)
