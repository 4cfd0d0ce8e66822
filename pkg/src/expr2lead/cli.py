"""Command-line pipeline: preprocess, network, targets, pockets, generate,
filter, report.

Each subcommand reads a JSON config, runs one stage, writes its artifacts
under the configured output directory, and appends a stage entry (config
snapshot, input digests, wall time, warnings) to the run manifest. Exit
codes: 0 success, 2 input error, 3 generation failure, 4 internal error.
"""

import csv
import hashlib
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import expr, network, structio
from .chem import (default_fragment_library, descriptors,
                   load_fragment_library, morgan_fingerprint, parse_smiles,
                   qed, rule_filters, sa_score, write_smiles)
from .errors import (EmptyResultError, Expr2LeadError, FetchError,
                     InitializationError, ParseError, SanitizeError,
                     ValidationError)
from .evolve import GAConfig, run as ga_run
from .geom import sdf_block

log = logging.getLogger("expr2lead")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GENERATION = 3
EXIT_INTERNAL = 4

HIST_BINS = 10


def _tool_version() -> str:
    try:
        return metadata.version("expr2lead")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise ValidationError(f"override {text!r} is not key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config(path, seed=None, overrides=()):
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    for text in overrides:
        key, value = _parse_override(text)
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override {key!r} crosses a non-object")
        node[parts[-1]] = value
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    cfg.setdefault("output_dir", "out")
    return cfg


def _outdir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest_entry(cfg, stage, inputs, wall_time, warnings, status):
    out = _outdir(cfg)
    path = Path(cfg.get("manifest", out / "manifest.json"))
    doc = {"tool_version": _tool_version(), "stages": {}}
    if path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            pass
    doc["tool_version"] = _tool_version()
    digests = {str(p): _sha256(p) for p in inputs if Path(p).exists()}
    doc.setdefault("stages", {})[stage] = {
        "status": status,
        "seed": cfg["seed"],
        "config": {k: v for k, v in cfg.items() if k != "manifest"},
        "input_digests": digests,
        "wall_time_s": round(wall_time, 3),
        "warnings": warnings,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def _run_stage(stage, cfg, fn):
    """Run one stage body, record the manifest entry, map errors to exit
    codes."""
    collector = _WarningCollector()
    logging.getLogger().addHandler(collector)
    start = time.perf_counter()
    status = "ok"
    code = EXIT_OK
    inputs = []
    try:
        inputs = fn()
    except InitializationError as exc:
        click.echo(f"{stage}: generation failure: {exc}", err=True)
        status, code = "generation_error", EXIT_GENERATION
    except (ParseError, ValidationError, EmptyResultError, SanitizeError,
            FileNotFoundError, FetchError) as exc:
        click.echo(f"{stage}: input error: {exc}", err=True)
        status, code = "input_error", EXIT_INPUT
    except Expr2LeadError as exc:
        click.echo(f"{stage}: input error: {exc}", err=True)
        status, code = "input_error", EXIT_INPUT
    except Exception as exc:  # pragma: no cover - invariant violations
        click.echo(f"{stage}: internal error: {exc}", err=True)
        status, code = "internal_error", EXIT_INTERNAL
    finally:
        logging.getLogger().removeHandler(collector)
        _write_manifest_entry(cfg, stage, inputs or [],
                              time.perf_counter() - start,
                              collector.messages, status)
    return code


def _r(v):
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- stage bodies ---------------------------------------------------------


def _stage_preprocess(cfg):
    p = cfg.get("preprocess", {})
    out = _outdir(cfg)
    matrix_path = p["expression_tsv"]
    probe_path = p.get("probe_map")
    ann_path = p.get("annotation")
    inputs = [matrix_path] + [x for x in (probe_path, ann_path) if x]
    m = expr.load_expression_matrix(
        matrix_path, orientation=p.get("orientation", "genes_rows"),
        level=expr.Level.EXON if probe_path else expr.Level.GENE)
    drops = []
    if probe_path:
        pm = expr.load_probe_map(probe_path)
        m, rep = expr.aggregate_exons(m, pm)
        drops.append(rep)
    if ann_path:
        ann = expr.load_gene_annotation(ann_path)
        m, rep = expr.filter_protein_coding(m, ann)
        drops.append(rep)
    m, rep = expr.filter_low_expression(
        m, threshold=p.get("low_expression_threshold", 0.5))
    drops.append(rep)
    qc = expr.qc_stats(m)
    hvg = expr.select_hvg(m, n=p.get("hvg_n", 2000))
    expr.write_matrix_tsv(hvg, out / "hvg_matrix.tsv")
    _write_csv(out / "library_sizes.csv", ["sample_id", "library_size"],
               [(s, _r(v)) for s, v in zip(m.sample_ids, qc.library_sizes)])
    _write_csv(out / "sample_correlation.csv",
               ["sample_id"] + list(m.sample_ids),
               [[s] + [_r(v) for v in row]
                for s, row in zip(m.sample_ids, qc.sample_correlation)])
    report = {"dropped": [{"reason": d.reason, "genes": d.dropped}
                          for d in drops],
              "flagged_zero_variance": qc.flagged_zero_variance}
    (out / "drop_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return inputs


def _stage_network(cfg):
    p = cfg.get("network", {})
    out = _outdir(cfg)
    matrix_path = p.get("hvg_matrix", str(Path(cfg["output_dir"]) /
                                          "hvg_matrix.tsv"))
    m = expr.load_expression_matrix(matrix_path, level=expr.Level.GENE)
    corr = network.correlation_matrix(m)
    betas = p.get("betas", list(range(1, 13)))
    scan = network.soft_threshold_scan(corr, betas)
    beta = p.get("beta") or scan.recommended_beta
    adj = network.adjacency(corr, beta)
    mods = network.detect_modules(
        adj, min_size=p.get("min_module_size", 5),
        cut=p.get("cut_height", 0.75))
    _write_csv(out / "beta_scan.csv",
               ["beta", "r_squared", "mean_connectivity", "recommended"],
               [(r.beta, _r(r.r_squared), _r(r.mean_connectivity),
                 int(r.beta == scan.recommended_beta))
                for r in scan.records])
    _write_csv(out / "modules.csv", ["gene_id", "module"],
               sorted((g, lab) for g, lab in mods.labels.items()))
    eigs = [network.module_eigengene(m, mod, i)
            for i, mod in enumerate(mods.modules)]
    _write_csv(out / "eigengenes.csv",
               ["module"] + list(m.sample_ids),
               [[e.module_label] + [_r(v) for v in e.values]
                for e in eigs])
    if len(eigs) >= 2:
        ecorr = network.eigengene_correlation(eigs)
        _write_csv(out / "eigengene_corr.csv",
                   ["module"] + [str(e.module_label) for e in eigs],
                   [[eigs[i].module_label] + [_r(v) for v in ecorr[i]]
                    for i in range(len(eigs))])
    else:
        _write_csv(out / "eigengene_corr.csv", ["module"], [])
    conn = network.intramodular_connectivity(adj, mods)
    ranked = network.rank_biomarkers(
        conn, exclusions=tuple(p.get("exclude_prefixes", ["HB"])),
        k=p.get("biomarker_top_k", 20))
    accession_map = p.get("accessions", {})
    _write_csv(out / "biomarkers.csv",
               ["rank", "gene_id", "module", "k_within", "accession"],
               [(e.rank, e.gene_id, e.module_label, _r(e.k_within),
                 accession_map.get(e.gene_id, ""))
                for e in ranked.entries])
    return [matrix_path]


def _stage_targets(cfg):
    p = cfg.get("targets", {})
    out = _outdir(cfg)
    biomarkers_path = p.get("biomarkers_csv",
                            str(Path(cfg["output_dir"]) / "biomarkers.csv"))
    with open(biomarkers_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "accession" not in rows[0]:
        raise ParseError(f"{biomarkers_path}: missing accession column")
    min_mean = p.get("min_mean_plddt", 70.0)
    qc_rows = []
    flagged = []
    for row in rows:
        acc = (row.get("accession") or "").strip()
        if not acc:
            continue
        try:
            s = structio.fetch_structure(acc, base_url=p.get("base_url"),
                                         cache_dir=p.get("cache_dir"))
        except (FetchError, ParseError) as exc:
            log.warning("fetch failed for %s: %s", acc, exc)
            flagged.append(acc)
            continue
        verdict = structio.qc_plddt(s, min_mean=min_mean)
        qc_rows.append((acc, _r(verdict["mean_plddt"]),
                        int(verdict["pass"])))
    _write_csv(out / "targets_qc.csv", ["accession", "mean_plddt", "pass"],
               qc_rows)
    (out / "targets_flagged.json").write_text(
        json.dumps({"flagged": flagged}, indent=2) + "\n", encoding="utf-8")
    return [biomarkers_path]


def _stage_pockets(cfg):
    p = cfg.get("pockets", {})
    out = _outdir(cfg)
    files = p.get("pocket_files", [])
    if not files:
        raise ValidationError("pockets.pocket_files must list at least one "
                              "pocket JSON file")
    pockets = []
    for path in files:
        try:
            pockets.extend(structio.load_pockets(path))
        except (ParseError, ValidationError) as exc:
            log.warning("skipping pocket file %s: %s", path, exc)
    if not pockets:
        raise EmptyResultError("no valid pockets loaded")
    top = structio.score_pockets(pockets, top_k=p.get("top_k", 3))
    _write_csv(out / "pockets_ranked.csv",
               ["id", "raw_score", "norm_score"],
               [(pk.id, _r(pk.raw_score), _r(pk.norm_score))
                for pk in top])
    best = next((pk for pk in top if pk.atom_coords is not None), None)
    if best is None:
        raise ValidationError("no ranked pocket provides atom coordinates "
                              "for hotspot extraction")
    hs = structio.kmeans_hotspots(best.atom_coords,
                                  k=p.get("hotspot_k", 4),
                                  seed=cfg["seed"])
    (out / "hotspots.json").write_text(json.dumps({
        "pocket_id": best.id,
        "pocket_center": list(hs.pocket_center),
        "pocket_radius": hs.pocket_radius,
        "centroids": [list(c) for c in hs.centroids],
    }, indent=2) + "\n", encoding="utf-8")
    return list(files)


def _load_hotspots(path) -> structio.HotspotSet:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return structio.HotspotSet(np.asarray(doc["pocket_center"], dtype=float),
                               float(doc["pocket_radius"]),
                               np.asarray(doc["centroids"], dtype=float))


def _stage_generate(cfg):
    p = cfg.get("generate", {})
    out = _outdir(cfg)
    hotspots_path = p.get("hotspots_json",
                          str(Path(cfg["output_dir"]) / "hotspots.json"))
    inputs = [hotspots_path]
    hs = _load_hotspots(hotspots_path)
    lib_path = p.get("fragment_library")
    lib = load_fragment_library(lib_path) if lib_path \
        else default_fragment_library()
    if lib_path:
        inputs.append(lib_path)
    refs = [morgan_fingerprint(e.mol) for e in lib.entries]
    ref_path = p.get("reference_smiles")
    if ref_path:
        inputs.append(ref_path)
        for line in Path(ref_path).read_text(encoding="utf-8").splitlines():
            smi = line.split()[0] if line.split() else ""
            if not smi:
                continue
            try:
                refs.append(morgan_fingerprint(parse_smiles(smi)))
            except (ParseError, SanitizeError) as exc:
                log.warning("skipping reference %r: %s", smi, exc)
    ga_cfg = GAConfig(
        population=p.get("population", 40),
        generations=p.get("generations", 20),
        hotspot_k=p.get("hotspot_k", 4),
        w_p=p.get("w_p", 0.45), w_f=p.get("w_f", 0.35),
        w_n=p.get("w_n", 0.15), w_s=p.get("w_s", 0.2),
        lambda_sa=p.get("lambda_sa", 0.1),
        p_crossover=p.get("p_crossover", 0.7),
        p_mutation=p.get("p_mutation", 0.3),
        p_reaction_first=p.get("p_reaction_first", 0.8),
        seed=cfg["seed"],
        top_k_report=p.get("top_k_report", 10))
    result = ga_run(ga_cfg, lib, hs, refs)
    _write_csv(out / "top_k.csv",
               ["rank", "smiles", "fitness", "pocket_fit", "sa_score",
                "qed", "logp"],
               [(i + 1, c.smiles, _r(c.fitness.total),
                 _r(c.fitness.s_fit), _r(c.sa), _r(c.qed),
                 _r(c.descriptors.logp))
                for i, c in enumerate(result.top)])
    with open(out / "candidates.smi", "w", encoding="utf-8") as fh:
        for i, c in enumerate(result.top, start=1):
            fh.write(f"{c.smiles} cand_{i}\n")
    with open(out / "candidates.sdf", "w", encoding="utf-8") as fh:
        for i, c in enumerate(result.top, start=1):
            fh.write(sdf_block(c.molecule, c.conformer, f"cand_{i}"))
            fh.write("$$$$\n")
    _write_csv(out / "generation_stats.csv",
               ["generation", "best_fitness", "mean_fitness",
                "mean_pairwise_tanimoto", "valid_fraction",
                "operator_counts"],
               [(s.generation, _r(s.best_fitness), _r(s.mean_fitness),
                 _r(s.mean_pairwise_tanimoto), _r(s.valid_fraction),
                 json.dumps(s.operator_counts, sort_keys=True))
                for s in result.stats])
    return inputs


def _stage_filter(cfg):
    p = cfg.get("filter", {})
    out = _outdir(cfg)
    smi_path = p.get("input_smiles",
                     str(Path(cfg["output_dir"]) / "candidates.smi"))
    rows = []
    survivors = []
    for lineno, line in enumerate(
            Path(smi_path).read_text(encoding="utf-8").splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        smi = fields[0]
        name = fields[1] if len(fields) > 1 else f"mol_{lineno}"
        try:
            mol = parse_smiles(smi)
        except (ParseError, SanitizeError) as exc:
            log.warning("skipping line %d (%r): %s", lineno, smi, exc)
            continue
        d = descriptors(mol)
        rep = rule_filters(d)
        ok = (rep.lipinski_violations == 0 and not rep.pfizer_flag
              and not rep.gsk_flag)
        rows.append((name, smi, _r(d.mw), _r(d.logp), _r(d.tpsa),
                     d.hbd, d.hba, d.rot_bonds, rep.lipinski_violations,
                     int(rep.pfizer_flag), int(rep.gsk_flag),
                     int(rep.golden_triangle_flag), int(ok)))
        if ok:
            survivors.append((smi, name))
    _write_csv(out / "filter_report.csv",
               ["name", "smiles", "mw", "logp", "tpsa", "hbd", "hba",
                "rot_bonds", "lipinski_violations", "pfizer_flag",
                "gsk_flag", "golden_triangle_flag", "pass"],
               rows)
    with open(out / "survivors.smi", "w", encoding="utf-8") as fh:
        for smi, name in survivors:
            fh.write(f"{smi} {name}\n")
    return [smi_path]


def _histogram(values, bins=HIST_BINS):
    if not values:
        return [], []
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return counts, edges


def _svg_bars(path, title, counts, edges):
    width, height = 480, 280
    margin = 40
    n = len(counts)
    peak = max(max(counts), 1) if n else 1
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<text x="{width // 2}" y="16" text-anchor="middle" '
             f'font-size="13">{title}</text>',
             f'<line x1="{margin}" y1="{height - margin}" '
             f'x2="{width - margin}" y2="{height - margin}" '
             f'stroke="black"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{margin}" '
             f'y2="{margin}" stroke="black"/>']
    if n:
        bar_w = (width - 2 * margin) / n
        for i, c in enumerate(counts):
            h = (height - 2 * margin) * c / peak
            x = margin + i * bar_w
            y = height - margin - h
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" '
                         f'width="{bar_w * 0.9:.1f}" height="{h:.1f}" '
                         f'fill="steelblue"/>')
        parts.append(f'<text x="{margin}" y="{height - margin + 16}" '
                     f'font-size="10">{edges[0]:.2f}</text>')
        parts.append(f'<text x="{width - margin}" '
                     f'y="{height - margin + 16}" text-anchor="end" '
                     f'font-size="10">{edges[-1]:.2f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def _svg_line(path, title, xs, ys):
    width, height = 480, 280
    margin = 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<text x="{width // 2}" y="16" text-anchor="middle" '
             f'font-size="13">{title}</text>',
             f'<line x1="{margin}" y1="{height - margin}" '
             f'x2="{width - margin}" y2="{height - margin}" '
             f'stroke="black"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{margin}" '
             f'y2="{margin}" stroke="black"/>']
    if xs:
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        xr = (x1 - x0) or 1.0
        yr = (y1 - y0) or 1.0
        pts = []
        for x, y in zip(xs, ys):
            px = margin + (width - 2 * margin) * (x - x0) / xr
            py = height - margin - (height - 2 * margin) * (y - y0) / yr
            pts.append(f"{px:.1f},{py:.1f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="firebrick" stroke-width="1.5"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def _write_hist_csv(path, counts, edges):
    _write_csv(path, ["bin_low", "bin_high", "count"],
               [(_r(float(edges[i])), _r(float(edges[i + 1])),
                 int(counts[i])) for i in range(len(counts))])


def _stage_report(cfg):
    p = cfg.get("report", {})
    out = _outdir(cfg)
    stats_path = p.get("generation_stats_csv",
                       str(Path(cfg["output_dir"]) / "generation_stats.csv"))
    topk_path = p.get("top_k_csv", str(Path(cfg["output_dir"]) / "top_k.csv"))
    with open(topk_path, encoding="utf-8") as fh:
        top_rows = list(csv.DictReader(fh))
    with open(stats_path, encoding="utf-8") as fh:
        stat_rows = list(csv.DictReader(fh))
    for column, stem, title in (("qed", "qed_hist", "QED distribution"),
                                ("sa_score", "sa_hist", "SA distribution"),
                                ("pocket_fit", "pocketfit_hist",
                                 "Pocket fit distribution")):
        values = [float(r[column]) for r in top_rows]
        counts, edges = _histogram(values)
        _write_hist_csv(out / f"{stem}.csv", counts, edges)
        _svg_bars(out / f"{stem}.svg", title, counts, edges)
    gens = [int(r["generation"]) for r in stat_rows]
    best = [float(r["best_fitness"]) for r in stat_rows]
    div = [float(r["mean_pairwise_tanimoto"]) for r in stat_rows]
    _write_csv(out / "convergence.csv", ["generation", "best_fitness"],
               [(g, _r(b)) for g, b in zip(gens, best)])
    _svg_line(out / "convergence.svg", "Best fitness per generation",
              gens, best)
    _write_csv(out / "diversity.csv",
               ["generation", "mean_pairwise_tanimoto"],
               [(g, _r(d)) for g, d in zip(gens, div)])
    _svg_line(out / "diversity.svg", "Mean pairwise Tanimoto per generation",
              gens, div)
    return [stats_path, topk_path]


# --- click wiring ---------------------------------------------------------


_STAGES = {
    "preprocess": _stage_preprocess,
    "network": _stage_network,
    "targets": _stage_targets,
    "pockets": _stage_pockets,
    "generate": _stage_generate,
    "filter": _stage_filter,
    "report": _stage_report,
}


@click.group()
def main():
    """Expression-to-lead pipeline."""
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


def _make_command(stage):
    @click.command(name=stage, help=f"Run the {stage} stage.")
    @click.option("--config", "config_path", required=True,
                  type=click.Path(), help="JSON config file.")
    @click.option("--seed", type=int, default=None,
                  help="Override the config seed.")
    @click.option("--override", "overrides", multiple=True,
                  help="Dotted key=value config override (value is JSON).")
    def cmd(config_path, seed, overrides):
        try:
            cfg = load_config(config_path, seed, overrides)
        except (ParseError, ValidationError, FileNotFoundError) as exc:
            click.echo(f"{stage}: input error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        code = _run_stage(stage, cfg, lambda: _STAGES[stage](cfg))
        sys.exit(code)

    return cmd


for _stage_name in _STAGES:
    main.add_command(_make_command(_stage_name))


if __name__ == "__main__":
    main()
