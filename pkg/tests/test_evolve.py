"""Evolutionary engine: fitness terms, operators, selection, and runs."""

import numpy as np
import pytest

from expr2lead.chem import (Fingerprint, brics_decompose,
                            default_fragment_library, morgan_fingerprint,
                            parse_smiles, write_smiles)
from expr2lead.chem.library import FragmentLibrary, LibraryEntry
from expr2lead.errors import InitializationError, ValidationError
from expr2lead.evolve import (Candidate, EvalContext, GAConfig,
                              combine_fitness, crossover, evaluate,
                              init_population, mutate, novelty, proxy_score,
                              run, step_generation, _substream)
from expr2lead.geom import embed3d
from expr2lead.structio import HotspotSet


def _hotspots():
    return HotspotSet(np.zeros(3), 8.0,
                      np.array([[2.0, 0, 0], [0, 2.0, 0],
                                [-2.0, 0, 0], [0, -2.0, 0]]))


def _descriptor(qed=1.0, logp=2.0, mw=350.0, rotb=3):
    from expr2lead.chem.descriptors import DescriptorRecord
    return DescriptorRecord(mw=mw, logp=logp, tpsa=60, hbd=1, hba=3,
                            rot_bonds=rotb, ring_count=1,
                            aromatic_ring_count=1, heavy_atom_count=20), qed


def test_proxy_all_ideal_is_one():
    d, q = _descriptor()
    assert proxy_score(d, q) == 1.0


def test_proxy_zero_qed_keeps_other_terms():
    d, _ = _descriptor()
    assert abs(proxy_score(d, 0.0) - 0.6) < 1e-12


def test_proxy_mw_out_of_band_contributes_zero():
    d, q = _descriptor(mw=700)
    assert abs(proxy_score(d, q) - 0.8) < 1e-12


def test_proxy_trapezoid_ramps():
    d, q = _descriptor(logp=-0.4)
    assert abs(proxy_score(d, q) - 0.8) < 1e-12
    d, q = _descriptor(logp=0.3)
    expected = 0.8 + 0.2 * (0.3 + 0.4) / 1.4
    assert abs(proxy_score(d, q) - expected) < 1e-12
    d, q = _descriptor(rotb=11)
    assert abs(proxy_score(d, q) - (0.8 + 0.2 * 0.5)) < 1e-12


def test_novelty_examples():
    fp = Fingerprint(frozenset({1, 2}), 2048, 2)
    assert novelty(fp, []) == 1.0
    assert novelty(fp, [fp]) == 0.0
    refs = [Fingerprint(frozenset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 2048, 2),
            Fingerprint(frozenset({1, 2, 3, 4}), 2048, 2),
            Fingerprint(frozenset(range(1, 21)), 2048, 2)]
    # similarities 0.2, 0.5, 0.1 -> novelty 0.5
    assert abs(novelty(fp, refs) - 0.5) < 1e-12


def test_fitness_combination_worked_example():
    total = combine_fitness(GAConfig(), 0.6, 0.71, 1.0, 0.2, 0.3)
    assert abs(total - 0.5985) < 1e-9


def test_fitness_all_zero_terms():
    assert combine_fitness(GAConfig(), 0, 0, 0, 0, 0) == 0.0


def test_fitness_projection_on_single_weight():
    cfg = GAConfig(w_p=0, w_f=1.0, w_n=0, w_s=0, lambda_sa=0)
    assert combine_fitness(cfg, 0.9, 0.37, 0.8, 0.5, 0.6) == 0.37


def test_zeroed_weight_removes_term_influence():
    cfg = GAConfig(w_n=0.0)
    a = combine_fitness(cfg, 0.5, 0.5, 0.1, 0.2, 0.2)
    b = combine_fitness(cfg, 0.5, 0.5, 0.9, 0.2, 0.2)
    assert a == b


def test_evaluate_terms_in_range():
    mol = parse_smiles("CC(=O)Nc1ccccc1")
    conf = embed3d(mol, seed=0)
    cand = Candidate(mol, conf, write_smiles(mol))
    ctx = EvalContext(_hotspots(), [], GAConfig())
    fb = evaluate(cand, ctx)
    for term in (fb.s_proxy, fb.s_fit, fb.s_novelty, fb.s_strain, fb.p_sa):
        assert 0.0 <= term <= 1.0
    assert fb.total == combine_fitness(GAConfig(), fb.s_proxy, fb.s_fit,
                                       fb.s_novelty, fb.s_strain, fb.p_sa)


def test_config_validation():
    with pytest.raises(ValidationError):
        GAConfig(population=1)
    with pytest.raises(ValidationError):
        GAConfig(p_crossover=1.5)
    with pytest.raises(ValidationError):
        GAConfig(w_p=-0.1)


def test_init_population_deterministic_and_valid():
    lib = default_fragment_library()
    cfg = GAConfig(population=10, seed=4)
    p1 = init_population(lib, _hotspots(), cfg)
    p2 = init_population(lib, _hotspots(), cfg)
    assert [c.smiles for c in p1] == [c.smiles for c in p2]
    assert len(p1) == 10
    assert all(c.molecule.sanitized for c in p1)
    assert all(c.fitness is not None for c in p1)


def test_init_population_single_fragment_library():
    entry_mol = parse_smiles("CCO")
    lib = FragmentLibrary(
        entries=[LibraryEntry("ethanol", "linker", "CCO", entry_mol,
                              write_smiles(entry_mol))],
        rejected=[])
    pop = init_population(lib, _hotspots(), GAConfig(population=2, seed=0))
    assert len(pop) == 2


def test_init_population_empty_library_fails():
    lib = FragmentLibrary(entries=[], rejected=[])
    with pytest.raises(InitializationError):
        init_population(lib, _hotspots(), GAConfig(population=4))


def test_crossover_reaction_path():
    cfg = GAConfig(p_reaction_first=1.0)
    rng = np.random.RandomState(0)
    a = Candidate(parse_smiles("CN"), None, "CN")
    b = Candidate(parse_smiles("CC(=O)O"), None, "CC(=O)O")
    child, op = crossover(a, b, rng, cfg)
    assert child is not None
    assert op == "reaction_link"


def test_crossover_children_sanitize_over_many_seeds():
    lib = default_fragment_library()
    cfg = GAConfig()
    produced = 0
    for seed in range(1000):
        rng = np.random.RandomState(seed)
        i, j = rng.randint(len(lib.entries), size=2)
        a = Candidate(lib.entries[int(i)].mol, None,
                      lib.entries[int(i)].canonical)
        b = Candidate(lib.entries[int(j)].mol, None,
                      lib.entries[int(j)].canonical)
        child, _ = crossover(a, b, rng, cfg)
        if child is not None:
            assert child.sanitized
            produced += 1
    assert produced > 100


def test_mutate_relax_keeps_graph():
    mol = parse_smiles("CC(=O)Nc1ccccc1")
    cand = Candidate(mol, embed3d(mol, seed=0), write_smiles(mol))
    lib = default_fragment_library()
    for seed in range(40):
        rng = np.random.RandomState(seed)
        child, op = mutate(cand, lib, rng)
        if op == "relax":
            assert write_smiles(child) == cand.smiles
            return
    pytest.fail("relax mutation never selected in 40 seeds")


def test_scaffold_hop_changes_one_fragment():
    mol = parse_smiles("CNC(=O)c1ccccc1")
    cand = Candidate(mol, None, write_smiles(mol))
    lib = default_fragment_library()
    for seed in range(60):
        rng = np.random.RandomState(seed)
        child, op = mutate(cand, lib, rng)
        if op == "scaffold_hop" and child is not None:
            parent_frags = sorted(write_smiles(f.mol)
                                  for f in brics_decompose(mol))
            child_frags = sorted(write_smiles(f.mol)
                                 for f in brics_decompose(child))
            assert child_frags != parent_frags
            return
    pytest.fail("scaffold hop never succeeded in 60 seeds")


def test_step_generation_elitism_and_dedup():
    lib = default_fragment_library()
    hs = _hotspots()
    cfg = GAConfig(population=8, seed=2)
    refs = [morgan_fingerprint(e.mol) for e in lib.entries[:10]]
    pop = init_population(lib, hs, cfg, refs)
    ctx = EvalContext(hs, refs, cfg, lib)
    best0 = max(c.fitness.total for c in pop)
    nxt, counts, valid_fraction = step_generation(pop, ctx, cfg, 0)
    assert max(c.fitness.total for c in nxt) >= best0
    smis = [c.smiles for c in nxt]
    assert len(smis) == len(set(smis))
    assert 0.0 <= valid_fraction <= 1.0


def test_step_generation_deterministic():
    lib = default_fragment_library()
    hs = _hotspots()
    cfg = GAConfig(population=6, seed=3)
    pop = init_population(lib, hs, cfg)
    ctx = EvalContext(hs, [], cfg, lib)
    a, _, _ = step_generation(pop, ctx, cfg, 0)
    b, _, _ = step_generation(pop, ctx, cfg, 0)
    assert [c.smiles for c in a] == [c.smiles for c in b]


def test_substreams_differ_across_slots():
    r1 = _substream(0, "gen", 0, 0).randint(1 << 30)
    r2 = _substream(0, "gen", 0, 1).randint(1 << 30)
    assert r1 != r2


def test_run_zero_generations_returns_ranked_init():
    lib = default_fragment_library()
    cfg = GAConfig(population=6, generations=0, seed=1, top_k_report=4)
    result = run(cfg, lib, _hotspots())
    assert result.stats == []
    totals = [c.fitness.total for c in result.top]
    assert totals == sorted(totals, reverse=True)
    assert len(result.top) <= 4


def test_run_small_end_to_end():
    lib = default_fragment_library()
    refs = [morgan_fingerprint(e.mol) for e in lib.entries]
    cfg = GAConfig(population=10, generations=3, seed=7, top_k_report=5)
    result = run(cfg, lib, _hotspots(), refs)
    assert len(result.stats) == 3
    best = [s.best_fitness for s in result.stats]
    assert all(b2 >= b1 - 1e-12 for b1, b2 in zip(best, best[1:]))
    assert all(c.fitness.s_novelty > 0 for c in result.top)
    smis = [c.smiles for c in result.top]
    assert len(smis) == len(set(smis))
    rerun = run(cfg, lib, _hotspots(), refs)
    assert [c.smiles for c in rerun.top] == smis
