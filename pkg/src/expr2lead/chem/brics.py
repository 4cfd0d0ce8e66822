"""Retrosynthetic fragmentation over a documented subset of BRICS-style
bond environments: amide C-N, ester C-O, sulfonamide S-N, aryl-ether C-O,
and ring-to-acyclic-linker bonds."""

from dataclasses import dataclass, field

from .mol import Bond, Molecule, sanitize


@dataclass
class Fragment:
    """A piece of a molecule carrying open attachment points."""
    mol: Molecule
    attach: list[int] = field(default_factory=list)


def _has_double_o(mol, i):
    return any(b.order == 2 and mol.atoms[j].element == "O"
               for j, b in mol.neighbors(i))


def _is_cleavable(mol: Molecule, bond: Bond) -> bool:
    if bond.order != 1 or bond.aromatic or mol.bond_in_ring(bond):
        return False
    ea = mol.atoms[bond.a].element
    eb = mol.atoms[bond.b].element
    pairs = ((bond.a, ea, bond.b, eb), (bond.b, eb, bond.a, ea))
    for i, ei, j, ej in pairs:
        # amide C(=O)-N with substituted N
        if (ei == "C" and ej == "N" and _has_double_o(mol, i)
                and mol.degree(j) >= 2):
            return True
        # ester C(=O)-O with substituted O
        if (ei == "C" and ej == "O" and _has_double_o(mol, i)
                and mol.degree(j) >= 2):
            return True
        # sulfonamide S(=O)(=O)-N
        if ei == "S" and ej == "N" and _has_double_o(mol, i):
            return True
        # ether O between two ring systems: ring-C - O(-ring-C)
        if ei == "C" and ej == "O" and mol.in_ring(i):
            if any(mol.in_ring(k) and k != i
                   for k in mol.neighbor_indices(j)):
                return True
        # ring atom to acyclic non-carbonyl carbon linker with onward
        # heavy neighbors
        if (mol.in_ring(i) and ej == "C" and not mol.in_ring(j)
                and mol.degree(j) >= 2 and not _has_double_o(mol, j)):
            return True
    return False


def cleavable_bonds(mol: Molecule) -> list[Bond]:
    return [b for b in mol.bonds if _is_cleavable(mol, b)]


def _extract_component(mol, atoms, cut_endpoints):
    sub = Molecule()
    mapping = {}
    for i in sorted(atoms):
        mapping[i] = sub.add_atom(type(mol.atoms[i])(
            element=mol.atoms[i].element,
            charge=mol.atoms[i].charge,
            aromatic=mol.atoms[i].aromatic,
            explicit_h=mol.atoms[i].explicit_h,
        ))
    for b in mol.bonds:
        if b.a in mapping and b.b in mapping:
            sub.add_bond(mapping[b.a], mapping[b.b], b.order, b.aromatic)
    attach = sorted(mapping[i] for i in cut_endpoints if i in mapping)
    return Fragment(sanitize(sub), attach)


def brics_decompose(mol: Molecule) -> list[Fragment]:
    """Cut every cleavable bond and return the resulting fragments with
    attachment points; a molecule with no cleavable bond comes back whole."""
    cuts = cleavable_bonds(mol)
    if not cuts:
        return [Fragment(mol, [])]
    cut_ids = {id(b) for b in cuts}
    cut_endpoints = {b.a for b in cuts} | {b.b for b in cuts}
    # connected components ignoring cut bonds
    seen = set()
    fragments = []
    for start in range(len(mol.atoms)):
        if start in seen:
            continue
        comp = {start}
        queue = [start]
        while queue:
            u = queue.pop()
            for bi in mol._adj[u]:
                b = mol.bonds[bi]
                if id(b) in cut_ids:
                    continue
                v = b.other(u)
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        fragments.append(_extract_component(mol, comp, cut_endpoints))
    return fragments
