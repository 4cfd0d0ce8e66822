"""Synthetic-accessibility surrogate from fragment complexity and ring topology.

Calibrated to ordering only (simple scaffolds score low, fused/macrocyclic or
highly branched ones score higher), with typical drug-like fragments landing
around 0.8-3. Not comparable to the conventional 1-10 scale.
"""

from .mol import Molecule

BASE = 0.8
FUSED_BOND_WEIGHT = 0.30
MACROCYCLE_WEIGHT = 0.60
BRANCH_WEIGHT = 0.50
SIZE_WEIGHT = 0.02
MACROCYCLE_MIN_SIZE = 9


def fused_ring_bond_count(mol: Molecule) -> int:
    """Bonds shared by two or more perceived rings."""
    count = 0
    for bond in mol.bonds:
        shared = 0
        for r in mol.rings:
            n = len(r)
            for k in range(n):
                if {r[k], r[(k + 1) % n]} == {bond.a, bond.b}:
                    shared += 1
                    break
        if shared >= 2:
            count += 1
    return count


def sa_score(mol: Molecule) -> float:
    if not mol.sanitized:
        raise ValueError("sa_score requires a sanitized molecule")
    heavy = len(mol.atoms)
    if heavy == 0:
        return BASE
    macro = sum(1 for r in mol.rings if len(r) >= MACROCYCLE_MIN_SIZE)
    branch_frac = sum(1 for i in range(heavy) if mol.degree(i) >= 3) / heavy
    return (BASE
            + FUSED_BOND_WEIGHT * fused_ring_bond_count(mol)
            + MACROCYCLE_WEIGHT * macro
            + BRANCH_WEIGHT * branch_frac
            + SIZE_WEIGHT * heavy)
