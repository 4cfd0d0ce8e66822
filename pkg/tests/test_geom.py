"""Conformer embedding, force-field relaxation, alignment, and pocket fit."""

import numpy as np
import pytest

from expr2lead.chem import parse_smiles
from expr2lead.errors import ValidationError
from expr2lead.geom import (ForceField, STRAIN_SCALE, Conformer,
                            align_fragment, embed3d, energy_and_gradient,
                            pocket_fit, relax, rodrigues_rotation, sdf_block,
                            strain_penalty)
from expr2lead.structio import HotspotSet


def test_benzene_embeds_to_regular_hexagon():
    m = parse_smiles("c1ccccc1")
    conf = embed3d(m, seed=3)
    assert conf.converged
    lengths = [np.linalg.norm(conf.positions[b.a] - conf.positions[b.b])
               for b in m.bonds]
    assert all(abs(l - 1.39) < 0.02 for l in lengths)
    # planarity: residual after removing the best-fit plane
    centered = conf.positions - conf.positions.mean(axis=0)
    rms = np.linalg.svd(centered, compute_uv=False)[-1] / np.sqrt(6)
    assert rms < 0.1


def test_ethane_bond_length():
    m = parse_smiles("CC")
    conf = embed3d(m, seed=1)
    assert abs(np.linalg.norm(conf.positions[0] - conf.positions[1])
               - 1.54) < 0.01


def test_gradient_matches_finite_differences():
    rng = np.random.RandomState(0)
    mols = [parse_smiles(s) for s in
            ["CCO", "c1ccccc1", "CC(=O)NC", "C1CCCCC1", "O=S(=O)(N)C"]]
    checked = 0
    for trial in range(50):
        m = mols[trial % len(mols)]
        pos = rng.randn(len(m.atoms), 3) * 1.5
        ff = ForceField(m)
        e, g = ff.energy_and_gradient(pos)
        eps = 1e-6
        num = np.zeros_like(g)
        for i in range(pos.shape[0]):
            for k in range(3):
                plus = pos.copy()
                plus[i, k] += eps
                minus = pos.copy()
                minus[i, k] -= eps
                num[i, k] = (ff.energy_and_gradient(plus)[0]
                             - ff.energy_and_gradient(minus)[0]) / (2 * eps)
        scale = max(np.abs(num).max(), 1.0)
        assert np.abs(g - num).max() / scale < 1e-4
        checked += 1
    assert checked == 50


def test_relax_monotone_energy():
    m = parse_smiles("CCCC")
    rng = np.random.RandomState(5)
    start = Conformer(rng.randn(4, 3) * 2)
    e0 = energy_and_gradient(m, start.positions)[0]
    out = relax(m, start)
    assert out.residual_energy <= e0


def test_embedding_deterministic_per_seed():
    m = parse_smiles("CC(=O)Nc1ccccc1")
    a = embed3d(m, seed=9)
    b = embed3d(m, seed=9)
    c = embed3d(m, seed=10)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_strain_midpoint():
    m = parse_smiles("CC")
    conf = Conformer(np.zeros((2, 3)), residual_energy=STRAIN_SCALE * 2)
    assert abs(strain_penalty(m, conf) - 0.5) < 1e-12


def test_strain_zero_for_relaxed():
    m = parse_smiles("CC")
    conf = Conformer(np.zeros((2, 3)), residual_energy=0.0)
    assert strain_penalty(m, conf) == 0.0


def test_rodrigues_properties_random():
    rng = np.random.RandomState(2)
    for _ in range(10_000):
        a = rng.randn(3)
        b = rng.randn(3)
        r = rodrigues_rotation(a, b)
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9
        got = r @ (a / np.linalg.norm(a))
        assert np.abs(got - b / np.linalg.norm(b)).max() < 1e-6


def test_rodrigues_antiparallel_cases():
    rng = np.random.RandomState(3)
    for _ in range(100):
        a = rng.randn(3)
        r = rodrigues_rotation(a, -a)
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9
        got = r @ (a / np.linalg.norm(a))
        assert np.abs(got + a / np.linalg.norm(a)).max() < 1e-6


def test_alignment_centers_and_points_at_hotspot():
    m = parse_smiles("CCCC")
    conf = embed3d(m, seed=0)
    center = np.array([5.0, 5.0, 5.0])
    hotspot = np.array([5.0, 9.0, 5.0])
    out = align_fragment(conf, hotspot, center)
    assert np.abs(out.positions.mean(axis=0) - center).max() < 1e-9
    far = out.positions[np.argmax(
        np.linalg.norm(out.positions - out.positions.mean(axis=0), axis=1))]
    direction = (far - center) / np.linalg.norm(far - center)
    assert np.abs(direction - np.array([0.0, 1.0, 0.0])).max() < 1e-6


def test_pocket_fit_worked_example():
    # half the atoms inside, mean hotspot distance 4 -> 0.6*0.5 + 0.4*0.5
    pos = np.array([[0.0, 0.0, 4.0], [4.0, 0.0, 0.0]])
    hs = HotspotSet(np.array([0.0, 0.0, 4.0]), 1.0, np.zeros((1, 3)))
    conf = Conformer(pos)
    fit = pocket_fit(conf, hs)
    assert abs(fit - (0.6 * 0.5 + 0.4 * 0.5)) < 1e-9


def test_pocket_fit_all_atoms_at_hotspot():
    hs = HotspotSet(np.zeros(3), 2.0, np.zeros((1, 3)))
    conf = Conformer(np.zeros((3, 3)))
    assert pocket_fit(conf, hs) == 1.0


def test_sdf_block_round_numbers():
    m = parse_smiles("CCO")
    conf = embed3d(m, seed=1)
    block = sdf_block(m, conf, "ethanol")
    lines = block.splitlines()
    assert lines[0] == "ethanol"
    assert "V2000" in lines[3]
    assert lines[-1] == "M  END"
    assert len([l for l in lines if l.endswith(" 0  0")]) >= 2
