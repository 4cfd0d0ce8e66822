"""Reaction-based linking and chemically safe merging of two molecules.

Templates are applied in a fixed documented order (amide coupling, urea
formation, sulfonamide formation, N-arylation, ether coupling); the first
match wins, matched sites are the lowest atom indices, and any product that
fails sanitization counts as a no-match.
"""

import json
import logging
from dataclasses import dataclass

from ..errors import SanitizeError
from .descriptors import is_amide_nitrogen
from .mol import Atom, Molecule, sanitize

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE_ORDER = [
    "amide_coupling",
    "urea_formation",
    "sulfonamide_formation",
    "n_arylation",
    "ether_coupling",
]


# -- site matchers (lowest atom index wins) --------------------------------


def _has_double_o(mol, i):
    return any(b.order == 2 and mol.atoms[j].element == "O"
               for j, b in mol.neighbors(i))


def find_amine(mol):
    """sp3 N with a free H, neutral, not an amide nitrogen."""
    for i, a in enumerate(mol.atoms):
        if (a.element == "N" and not a.aromatic and a.charge == 0
                and mol.h_count(i) >= 1 and not is_amide_nitrogen(mol, i)
                and not any(b.order > 1 for _, b in mol.neighbors(i))):
            return i
    return None


def find_carboxylic_acid(mol):
    """Returns (carbonyl C, hydroxyl O) of a -C(=O)OH group."""
    for i, a in enumerate(mol.atoms):
        if a.element != "C" or a.aromatic or not _has_double_o(mol, i):
            continue
        for j, b in mol.neighbors(i):
            if (b.order == 1 and mol.atoms[j].element == "O"
                    and mol.h_count(j) >= 1 and mol.degree(j) == 1):
                return i, j
    return None


def find_sulfonyl_leaving(mol):
    """Returns (S, leaving atom) of S(=O)(=O)X with X = OH or Cl."""
    for i, a in enumerate(mol.atoms):
        if a.element != "S":
            continue
        doubles = sum(1 for _, b in mol.neighbors(i)
                      if b.order == 2 and mol.atoms[b.other(i)].element == "O")
        if doubles < 2:
            continue
        for j, b in mol.neighbors(i):
            el = mol.atoms[j].element
            if b.order == 1 and (
                    (el == "O" and mol.h_count(j) >= 1 and mol.degree(j) == 1)
                    or el == "Cl"):
                return i, j
    return None


def find_aryl_halide(mol):
    """Returns (aromatic C, halogen) for C(ar)-Cl/Br."""
    for i, a in enumerate(mol.atoms):
        if a.element not in ("Cl", "Br") or mol.degree(i) != 1:
            continue
        j = mol.neighbor_indices(i)[0]
        if mol.atoms[j].aromatic:
            return j, i
    return None


def find_hydroxyl(mol):
    """Neutral O-H not part of a carboxylic acid."""
    acid = find_carboxylic_acid(mol)
    acid_o = acid[1] if acid else None
    for i, a in enumerate(mol.atoms):
        if (a.element == "O" and a.charge == 0 and mol.h_count(i) >= 1
                and not a.aromatic and i != acid_o):
            return i
    return None


# -- product assembly ------------------------------------------------------


def combine(a: Molecule, b: Molecule):
    """Disjoint union; returns (molecule, offset of b's atoms)."""
    m = a.copy()
    offset = len(m.atoms)
    for atom in b.atoms:
        m.add_atom(Atom(atom.element, atom.charge, atom.aromatic,
                        atom.explicit_h))
    for bond in b.bonds:
        m.add_bond(bond.a + offset, bond.b + offset, bond.order, bond.aromatic)
    return m, offset


def remove_atoms(mol: Molecule, drop: set[int]) -> Molecule:
    m = Molecule()
    mapping = {}
    for i, atom in enumerate(mol.atoms):
        if i in drop:
            continue
        mapping[i] = m.add_atom(Atom(atom.element, atom.charge, atom.aromatic,
                                     atom.explicit_h))
    for bond in mol.bonds:
        if bond.a in mapping and bond.b in mapping:
            m.add_bond(mapping[bond.a], mapping[bond.b], bond.order,
                       bond.aromatic)
    return m


def _finish(product: Molecule):
    try:
        return sanitize(product)
    except SanitizeError as exc:
        log.debug("reaction product failed sanitize: %s", exc)
        return None


# -- templates -------------------------------------------------------------


def _amide_coupling(a, b):
    for amine_mol, acid_mol, swap in ((a, b, False), (b, a, True)):
        n_idx = find_amine(amine_mol)
        acid = find_carboxylic_acid(acid_mol)
        if n_idx is None or acid is None:
            continue
        c_idx, oh_idx = acid
        if swap:
            m, offset = combine(acid_mol, amine_mol)
            m.add_bond(c_idx, n_idx + offset, 1)
            return _finish(remove_atoms(m, {oh_idx}))
        m, offset = combine(amine_mol, acid_mol)
        m.add_bond(n_idx, c_idx + offset, 1)
        return _finish(remove_atoms(m, {oh_idx + offset}))
    return None


def _urea_formation(a, b):
    na = find_amine(a)
    nb = find_amine(b)
    if na is None or nb is None:
        return None
    m, offset = combine(a, b)
    c = m.add_atom(Atom("C"))
    o = m.add_atom(Atom("O"))
    m.add_bond(c, o, 2)
    m.add_bond(na, c, 1)
    m.add_bond(nb + offset, c, 1)
    return _finish(m)


def _sulfonamide_formation(a, b):
    for s_mol, n_mol, swap in ((a, b, False), (b, a, True)):
        sx = find_sulfonyl_leaving(s_mol)
        n_idx = find_amine(n_mol)
        if sx is None or n_idx is None:
            continue
        s_idx, leave = sx
        m, offset = combine(s_mol, n_mol)
        m.add_bond(s_idx, n_idx + offset, 1)
        return _finish(remove_atoms(m, {leave}))
    return None


def _n_arylation(a, b):
    for ar_mol, n_mol, swap in ((a, b, False), (b, a, True)):
        ar = find_aryl_halide(ar_mol)
        n_idx = find_amine(n_mol)
        if ar is None or n_idx is None:
            continue
        c_idx, hal = ar
        m, offset = combine(ar_mol, n_mol)
        m.add_bond(c_idx, n_idx + offset, 1)
        return _finish(remove_atoms(m, {hal}))
    return None


def _ether_coupling(a, b):
    # hydroxyl + aryl halide, falling back to alcohol condensation
    for o_mol, other, swap in ((a, b, False), (b, a, True)):
        o_idx = find_hydroxyl(o_mol)
        if o_idx is None:
            continue
        ar = find_aryl_halide(other)
        if ar is not None:
            c_idx, hal = ar
            m, offset = combine(o_mol, other)
            m.add_bond(o_idx, c_idx + offset, 1)
            return _finish(remove_atoms(m, {hal + offset}))
        o_other = find_hydroxyl(other)
        if o_other is not None:
            carbons = [j for j in other.neighbor_indices(o_other)
                       if other.atoms[j].element == "C"]
            if not carbons:
                continue
            m, offset = combine(o_mol, other)
            m.add_bond(o_idx, carbons[0] + offset, 1)
            return _finish(remove_atoms(m, {o_other + offset}))
    return None


TEMPLATES = {
    "amide_coupling": _amide_coupling,
    "urea_formation": _urea_formation,
    "sulfonamide_formation": _sulfonamide_formation,
    "n_arylation": _n_arylation,
    "ether_coupling": _ether_coupling,
}


@dataclass
class ReactionTemplateSet:
    order: list[str]

    @classmethod
    def default(cls):
        return cls(list(DEFAULT_TEMPLATE_ORDER))

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            names = json.load(fh)["templates"]
        unknown = [n for n in names if n not in TEMPLATES]
        if unknown:
            raise ValueError(f"unknown reaction templates: {unknown}")
        return cls(names)


def reaction_link(a: Molecule, b: Molecule,
                  templates: ReactionTemplateSet | None = None):
    """Apply the first matching reaction template; None when nothing fits."""
    templates = templates or ReactionTemplateSet.default()
    for name in templates.order:
        product = TEMPLATES[name](a, b)
        if product is not None:
            return product
    return None


def safe_merge(a: Molecule, b: Molecule,
               attach_a: int | None = None, attach_b: int | None = None):
    """Join two molecules with a single bond at attachment points when given,
    else at the lowest-index atoms with a free valence; None when no
    valence-legal junction exists."""
    ia = attach_a if attach_a is not None else _free_valence_atom(a)
    ib = attach_b if attach_b is not None else _free_valence_atom(b)
    if ia is None or ib is None:
        return None
    m, offset = combine(a, b)
    for idx in (ia, ib + offset):
        atom = m.atoms[idx]
        if atom.explicit_h is not None:
            if atom.explicit_h < 1:
                return None
            atom.explicit_h -= 1
    m.add_bond(ia, ib + offset, 1)
    return _finish(m)


def _free_valence_atom(mol):
    for i in range(len(mol.atoms)):
        if mol.h_count(i) >= 1:
            return i
    return None
