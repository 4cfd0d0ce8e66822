"""Physicochemical descriptors from the molecular graph.

LogP uses a reduced atom-contribution table (~20 documented classes in the
spirit of Wildman-Crippen); TPSA uses a reduced Ertl-style fragment table
over N/O/S/P environments. Both are internally consistent rather than
literature-exact, which is what the downstream desirability scores need.
"""

from dataclasses import dataclass

from .mol import Molecule

ATOMIC_MASS = {
    "H": 1.008, "B": 10.81, "C": 12.011, "N": 14.007, "O": 15.999,
    "F": 18.998, "P": 30.974, "S": 32.06, "Cl": 35.45, "Br": 79.904,
    "I": 126.904,
}

# logp contributions per documented atom class
_LOGP = {
    "C_arom": 0.29,
    "C_aliph_hc": 0.19,     # carbon bonded only to C/H
    "C_aliph_het": -0.05,   # carbon with a heteroatom neighbor
    "C_carbonyl": -0.24,    # carbon double-bonded to O
    "N_arom": -0.49,
    "N_amide": -0.28,
    "N_amine": -0.60,
    "O_arom": 0.11,
    "O_hydroxyl": -0.40,
    "O_carbonyl": -0.12,
    "O_ether": -0.08,
    "S": 0.25,
    "P": -0.45,
    "B": -0.04,
    "F": 0.42,
    "Cl": 0.69,
    "Br": 0.85,
    "I": 0.89,
    "H_on_C": 0.123,
    "H_on_het": -0.27,
}

# TPSA fragment contributions (Å²) per documented environment
_TPSA = {
    "N_arom": 12.89,
    "N_arom_H": 15.79,
    "N_nitrile": 23.79,
    "N_imine": 12.36,
    "NH2": 26.02,
    "NH": 12.03,
    "N3": 3.24,
    "O_arom": 13.14,
    "O_hydroxyl": 20.23,
    "O_carbonyl": 17.07,
    "O_ether": 9.23,
    "O_anion": 23.06,
    "S_arom": 28.24,
    "S_sulfonyl": 8.38,
    "S_thioether": 25.30,
    "P": 13.59,
}


@dataclass
class DescriptorRecord:
    mw: float
    logp: float
    tpsa: float
    hbd: int
    hba: int
    rot_bonds: int
    ring_count: int
    aromatic_ring_count: int
    heavy_atom_count: int


def molecular_weight(mol: Molecule) -> float:
    mw = 0.0
    for i, atom in enumerate(mol.atoms):
        mw += ATOMIC_MASS[atom.element]
        mw += ATOMIC_MASS["H"] * mol.h_count(i)
    return mw


def _has_double_o(mol, i):
    return any(b.order == 2 and mol.atoms[j].element == "O"
               for j, b in mol.neighbors(i))


def is_amide_nitrogen(mol: Molecule, i: int) -> bool:
    if mol.atoms[i].element != "N" or mol.atoms[i].aromatic:
        return False
    return any(
        b.order == 1 and mol.atoms[j].element == "C" and _has_double_o(mol, j)
        for j, b in mol.neighbors(i)
    )


def _logp_class(mol, i):
    atom = mol.atoms[i]
    el = atom.element
    if el == "C":
        if atom.aromatic:
            return "C_arom"
        if _has_double_o(mol, i):
            return "C_carbonyl"
        if all(mol.atoms[j].element in ("C", "H")
               for j in mol.neighbor_indices(i)):
            return "C_aliph_hc"
        return "C_aliph_het"
    if el == "N":
        if atom.aromatic:
            return "N_arom"
        if is_amide_nitrogen(mol, i):
            return "N_amide"
        return "N_amine"
    if el == "O":
        if atom.aromatic:
            return "O_arom"
        if any(b.order == 2 for _, b in mol.neighbors(i)):
            return "O_carbonyl"
        if mol.h_count(i) > 0:
            return "O_hydroxyl"
        return "O_ether"
    return el if el in _LOGP else "S"


def logp(mol: Molecule) -> float:
    total = 0.0
    for i, atom in enumerate(mol.atoms):
        total += _LOGP[_logp_class(mol, i)]
        h = mol.h_count(i)
        total += h * (_LOGP["H_on_C"] if atom.element == "C"
                      else _LOGP["H_on_het"])
    return total


def _tpsa_class(mol, i):
    atom = mol.atoms[i]
    el = atom.element
    h = mol.h_count(i)
    if el == "N":
        if any(b.order == 3 for _, b in mol.neighbors(i)):
            return "N_nitrile"
        if atom.aromatic:
            return "N_arom_H" if h > 0 else "N_arom"
        if any(b.order == 2 for _, b in mol.neighbors(i)):
            return "N_imine"
        if h >= 2:
            return "NH2"
        if h == 1:
            return "NH"
        return "N3"
    if el == "O":
        if atom.charge < 0:
            return "O_anion"
        if atom.aromatic:
            return "O_arom"
        if any(b.order == 2 for _, b in mol.neighbors(i)):
            return "O_carbonyl"
        if h > 0:
            return "O_hydroxyl"
        return "O_ether"
    if el == "S":
        if atom.aromatic:
            return "S_arom"
        if _has_double_o(mol, i):
            return "S_sulfonyl"
        return "S_thioether"
    if el == "P":
        return "P"
    return None


def tpsa(mol: Molecule) -> float:
    total = 0.0
    for i in range(len(mol.atoms)):
        cls = _tpsa_class(mol, i)
        if cls is not None:
            total += _TPSA[cls]
    return total


def hbd_count(mol: Molecule) -> int:
    return sum(
        1 for i, a in enumerate(mol.atoms)
        if a.element in ("N", "O") and mol.h_count(i) >= 1
    )


def hba_count(mol: Molecule) -> int:
    """N/O acceptors; excludes positively charged atoms, amide nitrogens,
    and pyrrole-type aromatic nitrogens (lone pair in the ring)."""
    from .mol import pi_electrons

    count = 0
    for i, atom in enumerate(mol.atoms):
        if atom.element not in ("N", "O") or atom.charge > 0:
            continue
        if is_amide_nitrogen(mol, i):
            continue
        if atom.element == "N" and atom.aromatic and pi_electrons(mol, i) == 2:
            continue
        count += 1
    return count


def rotatable_bond_count(mol: Molecule) -> int:
    """Non-ring single bonds between heavy atoms, each end bearing another
    heavy neighbor; amide C-N bonds excluded."""
    count = 0
    for bond in mol.bonds:
        if bond.order != 1 or bond.aromatic or mol.bond_in_ring(bond):
            continue
        if mol.degree(bond.a) < 2 or mol.degree(bond.b) < 2:
            continue
        if _is_amide_cn(mol, bond):
            continue
        count += 1
    return count


def _is_amide_cn(mol, bond):
    for c, n_ in ((bond.a, bond.b), (bond.b, bond.a)):
        if (mol.atoms[c].element == "C" and mol.atoms[n_].element == "N"
                and _has_double_o(mol, c)):
            return True
    return False


def aromatic_ring_count(mol: Molecule) -> int:
    return sum(1 for r in mol.rings
               if all(mol.atoms[i].aromatic for i in r))


def descriptors(mol: Molecule) -> DescriptorRecord:
    if not mol.sanitized:
        raise ValueError("descriptors require a sanitized molecule")
    return DescriptorRecord(
        mw=molecular_weight(mol),
        logp=logp(mol),
        tpsa=tpsa(mol),
        hbd=hbd_count(mol),
        hba=hba_count(mol),
        rot_bonds=rotatable_bond_count(mol),
        ring_count=len(mol.rings),
        aromatic_ring_count=aromatic_ring_count(mol),
        heavy_atom_count=len(mol.atoms),
    )
