"""Fragment decomposition, reaction linking, safe merging, and the fragment
library."""

import json

import pytest

from expr2lead.chem import (brics_decompose, cleavable_bonds,
                            default_fragment_library, load_fragment_library,
                            parse_smiles, reaction_link, safe_merge,
                            write_smiles)
from expr2lead.chem.react import ReactionTemplateSet
from expr2lead.errors import EmptyResultError

from conftest import graphs_isomorphic


def test_benzene_has_no_cleavable_bonds():
    m = parse_smiles("c1ccccc1")
    frags = brics_decompose(m)
    assert len(frags) == 1
    assert frags[0].attach == []
    assert graphs_isomorphic(frags[0].mol, m)


def test_n_methylbenzamide_cut_at_amide():
    frags = brics_decompose(parse_smiles("CNC(=O)c1ccccc1"))
    smis = sorted(write_smiles(f.mol) for f in frags)
    assert len(frags) == 2
    assert smis == sorted([write_smiles(parse_smiles("CN")),
                           write_smiles(parse_smiles("O=Cc1ccccc1"))])


def test_fragment_count_matches_cut_enumeration():
    for smi in ["CNC(=O)c1ccc(OC2CCCCC2)cc1", "CC(=O)OC1CCCCC1",
                "O=S(=O)(NC)c1ccccc1"]:
        m = parse_smiles(smi)
        cuts = cleavable_bonds(m)
        frags = brics_decompose(m)
        # cutting all cleavable bonds of a tree of fragments gives cuts+1
        # connected components
        assert len(frags) == len(cuts) + 1
        total_heavy = sum(len(f.mol.atoms) for f in frags)
        assert total_heavy == len(m.atoms)


def test_amide_coupling_product():
    amine = parse_smiles("CN")
    acid = parse_smiles("CC(=O)O")
    product = reaction_link(amine, acid)
    assert product is not None
    assert graphs_isomorphic(product, parse_smiles("CNC(C)=O"))


def test_no_reactive_groups_yields_none():
    a = parse_smiles("c1ccccc1")
    assert reaction_link(a, a) is None


def test_link_deterministic_first_match():
    amine = parse_smiles("CN")
    diacid = parse_smiles("OC(=O)CCC(=O)O")
    p1 = reaction_link(amine, diacid)
    p2 = reaction_link(amine, diacid)
    assert write_smiles(p1) == write_smiles(p2)


def test_template_order_from_json(tmp_path):
    path = tmp_path / "templates.json"
    path.write_text(json.dumps({"templates": ["ether_coupling",
                                              "n_arylation"]}))
    templates = ReactionTemplateSet.from_json(path)
    amine_alcohol = parse_smiles("NCCO")
    aryl_halide = parse_smiles("Clc1ccccc1")
    reordered = reaction_link(amine_alcohol, aryl_halide, templates)
    default = reaction_link(amine_alcohol, aryl_halide)
    assert reordered is not None and default is not None
    assert write_smiles(reordered) != write_smiles(default)


def test_safe_merge_benzene_methyl_gives_toluene():
    product = safe_merge(parse_smiles("c1ccccc1"), parse_smiles("C"))
    assert graphs_isomorphic(product, parse_smiles("Cc1ccccc1"))


def test_safe_merge_without_free_valence_fails():
    quat = parse_smiles("FC(F)(F)F")
    assert safe_merge(quat, quat) is None


def test_safe_merge_never_violates_valence_over_random_pairs():
    import numpy as np
    lib = default_fragment_library()
    rng = np.random.RandomState(3)
    for _ in range(1000):
        i, j = rng.randint(len(lib.entries), size=2)
        product = safe_merge(lib.entries[int(i)].mol, lib.entries[int(j)].mol)
        if product is not None:
            assert product.sanitized


def test_default_library_shape():
    lib = default_fragment_library()
    assert len(lib.entries) == 61
    assert len(lib.rejected) == 5
    rejected = {r["smiles"] for r in lib.rejected}
    assert "c1cc(CF3)ccc1" in rejected


def test_library_accepts_pyridine():
    lib = default_fragment_library()
    assert any(e.smiles == "c1ncccc1" for e in lib.entries)


def test_library_csv_round_trip(tmp_path):
    path = tmp_path / "lib.csv"
    path.write_text("name,class,smiles\n"
                    "benzene,aromatic,c1ccccc1\n"
                    "benzene2,aromatic,C1=CC=CC=C1\n"
                    "amine,linker,CN\n"
                    "broken,linker,C1CC\n")
    lib = load_fragment_library(path)
    assert len(lib.entries) == 2  # duplicate benzene collapses
    assert len(lib.rejected) == 1


def test_empty_library_rejected(tmp_path):
    path = tmp_path / "lib.csv"
    path.write_text("name,class,smiles\nbroken,linker,C1CC\n")
    with pytest.raises(EmptyResultError):
        load_fragment_library(path)
