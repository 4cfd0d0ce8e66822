"""Shared test helpers: a graph-isomorphism oracle for molecules and
synthetic pipeline fixtures."""

import json

import numpy as np


def _atom_key(mol, i):
    a = mol.atoms[i]
    return (a.element, a.charge, a.aromatic, mol.h_count(i))


def _bond_key(bond):
    return ("ar",) if bond.aromatic else (bond.order,)


def graphs_isomorphic(m1, m2) -> bool:
    """VF2-style backtracking isomorphism check on element/charge/aromatic/H
    atom labels and bond orders. Independent of the canonicalization code."""
    n = len(m1.atoms)
    if n != len(m2.atoms) or len(m1.bonds) != len(m2.bonds):
        return False
    keys1 = sorted(_atom_key(m1, i) for i in range(n))
    keys2 = sorted(_atom_key(m2, i) for i in range(n))
    if keys1 != keys2:
        return False
    mapping = {}
    used = set()

    def compatible(i, j):
        if _atom_key(m1, i) != _atom_key(m2, j):
            return False
        for k, b in m1.neighbors(i):
            if k in mapping:
                other = m2.bond_between(mapping[k], j)
                if other is None or _bond_key(other) != _bond_key(b):
                    return False
        for k2, b2 in m2.neighbors(j):
            inv = {v: u for u, v in mapping.items()}
            if k2 in inv:
                other = m1.bond_between(inv[k2], i)
                if other is None or _bond_key(other) != _bond_key(b2):
                    return False
        return True

    order = sorted(range(n), key=lambda i: -m1.degree(i))

    def extend(pos):
        if pos == n:
            return True
        i = order[pos]
        for j in range(n):
            if j in used or not compatible(i, j):
                continue
            mapping[i] = j
            used.add(j)
            if extend(pos + 1):
                return True
            del mapping[i]
            used.remove(j)
        return False

    return extend(0)


def make_cohort_files(directory, seed=42, n_samples=30, genes_per_block=60,
                      n_blocks=3, noise_genes=20):
    """Synthetic exon-level cohort with planted co-expression blocks, probe
    map, and biotype annotation. The first gene of each block is the hub
    (highest mixing weight)."""
    rng = np.random.RandomState(seed)
    rows, gene_names = [], []
    for b in range(n_blocks):
        base = rng.randn(n_samples)
        for i in range(genes_per_block):
            mix = 0.9 if i == 0 else rng.uniform(0.5, 0.85)
            rows.append(mix * base + (1 - mix) * rng.randn(n_samples))
            gene_names.append(f"G{b}_{i:03d}")
    for i in range(noise_genes):
        rows.append(rng.randn(n_samples))
        gene_names.append(f"NOISE{i:03d}")
    rows.append(rng.randn(n_samples) * 2)
    gene_names.append("HBB")
    rows.append(rng.randn(n_samples))
    gene_names.append("LINC001")
    vals = np.array(rows)
    vals = vals - vals.min() + 1.0
    vals = np.vstack([vals, np.full(n_samples, 0.1)])
    gene_names.append("LOWEXP")
    samples = [f"S{j:02d}" for j in range(n_samples)]
    with open(directory / "expression.tsv", "w", encoding="utf-8") as fh:
        fh.write("probe_id\t" + "\t".join(samples) + "\n")
        for name, row in zip(gene_names, vals):
            for e in range(2):
                jitter = np.clip(row + rng.normal(scale=0.05, size=n_samples),
                                 0, None)
                fh.write(f"{name}_ex{e}\t"
                         + "\t".join(f"{v:.6f}" for v in jitter) + "\n")
    with open(directory / "probe_map.tsv", "w", encoding="utf-8") as fh:
        fh.write("probe_id\tgene\n")
        for name in gene_names:
            for e in range(2):
                fh.write(f"{name}_ex{e}\t{name}\n")
    with open(directory / "annotation.tsv", "w", encoding="utf-8") as fh:
        fh.write("gene\tbiotype\n")
        for name in gene_names:
            bt = "lncRNA" if name.startswith("LINC") else "protein-coding"
            fh.write(f"{name}\t{bt}\n")
    return gene_names


def make_pocket_file(directory, seed=42):
    rng = np.random.RandomState(seed)
    pts = rng.randn(40, 3) * 2.0 + np.array([10.0, 5.0, -3.0])
    pockets = {"pockets": [
        {"id": "P1", "volume": 500, "depth": 20, "enclosure": 0.8,
         "hydrophobicity": 0.5, "aromaticity": 10, "donors": 6,
         "acceptors": 6, "atoms": pts.tolist()},
        {"id": "P2", "volume": 120, "depth": 6, "enclosure": 0.3,
         "hydrophobicity": 0.2, "aromaticity": 2, "donors": 1,
         "acceptors": 2},
        {"id": "P3", "volume": 260, "depth": 11, "enclosure": 0.5,
         "hydrophobicity": 0.4, "aromaticity": 5, "donors": 3,
         "acceptors": 3},
    ]}
    path = directory / "pockets.json"
    path.write_text(json.dumps(pockets), encoding="utf-8")
    return path


def make_pipeline_config(directory, population=12, generations=3, seed=5,
                         hvg_n=150, top_k_report=6):
    cfg = {
        "output_dir": str(directory / "out"),
        "seed": seed,
        "preprocess": {
            "expression_tsv": str(directory / "expression.tsv"),
            "probe_map": str(directory / "probe_map.tsv"),
            "annotation": str(directory / "annotation.tsv"),
            "hvg_n": hvg_n,
        },
        "network": {"biomarker_top_k": 20},
        "targets": {},
        "pockets": {"pocket_files": [str(directory / "pockets.json")],
                    "hotspot_k": 4},
        "generate": {"population": population, "generations": generations,
                     "top_k_report": top_k_report},
        "filter": {},
        "report": {},
    }
    path = directory / "config.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path, cfg
