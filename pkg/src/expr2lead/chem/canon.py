"""Canonical SMILES output via iterative-refinement atom ranking.

Ranking starts from local invariants (element, charge, aromaticity, H count,
degree, ring membership) and refines with sorted neighbor ranks until stable;
remaining ties are split deterministically, which yields identical strings for
automorphic atoms regardless of input atom order.
"""

from .mol import Molecule, allowed_valences

_BOND_RANK_KEY = {1: 1, 2: 2, 3: 3}


def _rank_by(keys):
    order = sorted(set(keys))
    lookup = {k: r for r, k in enumerate(order)}
    return [lookup[k] for k in keys]


def _bond_key(bond):
    return 0 if bond.aromatic else _BOND_RANK_KEY[bond.order]


def canonical_ranks(mol: Molecule) -> list[int]:
    n = len(mol.atoms)
    keys = [
        (a.element, a.charge, a.aromatic, mol.h_count(i), mol.degree(i),
         mol.in_ring(i))
        for i, a in enumerate(mol.atoms)
    ]
    ranks = _rank_by(keys)
    tiebreak = [0] * n

    def refine(ranks):
        while True:
            keys = [
                (ranks[i], tiebreak[i],
                 tuple(sorted((_bond_key(b), ranks[j])
                              for j, b in mol.neighbors(i))))
                for i in range(n)
            ]
            new = _rank_by(keys)
            if new == ranks:
                return ranks
            ranks = new

    ranks = refine(ranks)
    counter = 1
    while len(set(ranks)) < n:
        # split the lowest tied class at its lowest-index member
        by_rank = {}
        for i, r in enumerate(ranks):
            by_rank.setdefault(r, []).append(i)
        r = min(r for r, members in by_rank.items() if len(members) > 1)
        tiebreak[min(by_rank[r])] = counter
        counter += 1
        ranks = refine(ranks)
    return ranks


def write_smiles(mol: Molecule) -> str:
    """Canonical SMILES of a sanitized molecule; disconnected components are
    joined with '.'."""
    if not mol.sanitized:
        raise ValueError("write_smiles requires a sanitized molecule")
    ranks = canonical_ranks(mol)
    n = len(mol.atoms)
    visited = [False] * n
    # DFS pass 1: spanning tree + ring (back) edges
    children = {i: [] for i in range(n)}
    ring_digit_at = {i: [] for i in range(n)}  # atom -> [(digit, bond)]
    next_digit = [1]
    parts = []

    def neighbor_order(i):
        return sorted(mol.neighbors(i), key=lambda jb: (ranks[jb[0]], jb[0]))

    def discover(root):
        used_bonds = set()
        stack = [(root, None)]
        seen = {root}
        order = []
        tree_children = {i: [] for i in range(n)}
        ring_bonds = []
        # iterative DFS matching the emit pass ordering
        def dfs(i):
            order.append(i)
            for j, b in neighbor_order(i):
                if id(b) in used_bonds:
                    continue
                if j in seen:
                    used_bonds.add(id(b))
                    ring_bonds.append((i, j, b))
                    continue
                used_bonds.add(id(b))
                seen.add(j)
                tree_children[i].append((j, b))
                dfs(j)
        dfs(root)
        return tree_children, ring_bonds, seen

    remaining = set(range(n))
    while remaining:
        root = min(remaining, key=lambda i: (ranks[i], i))
        tree_children, ring_bonds, seen = discover(root)
        remaining -= seen
        digits = {}
        for i, j, b in ring_bonds:
            d = next_digit[0]
            next_digit[0] += 1
            ring_digit_at[i].append((d, b))
            ring_digit_at[j].append((d, b))
            digits[id(b)] = d

        out = []

        def emit(i, parent_bond):
            if parent_bond is not None:
                out.append(_bond_symbol(mol, parent_bond))
            out.append(_atom_token(mol, i))
            for d, b in sorted(ring_digit_at[i]):
                out.append(_bond_symbol(mol, b))
                out.append(str(d) if d < 10 else f"%{d:02d}")
            kids = tree_children[i]
            for k, (j, b) in enumerate(kids):
                if k < len(kids) - 1:
                    out.append("(")
                    emit(j, b)
                    out.append(")")
                else:
                    emit(j, b)

        emit(root, None)
        parts.append("".join(out))
    return ".".join(parts)


def _bond_symbol(mol, bond):
    if bond.aromatic:
        return ""
    if bond.order == 2:
        return "="
    if bond.order == 3:
        return "#"
    if mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic:
        return "-"  # explicit single between two aromatic atoms
    return ""


def _atom_token(mol, i):
    atom = mol.atoms[i]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    h = mol.h_count(i)
    if atom.charge == 0 and h == _plain_inferred_h(mol, i):
        return symbol
    token = symbol
    if h == 1:
        token += "H"
    elif h > 1:
        token += f"H{h}"
    if atom.charge > 0:
        token += "+" if atom.charge == 1 else f"+{atom.charge}"
    elif atom.charge < 0:
        token += "-" if atom.charge == -1 else f"-{-atom.charge}"
    return f"[{token}]"


def _plain_inferred_h(mol, i):
    """Hydrogen count a reader would infer for the unbracketed symbol."""
    atom = mol.atoms[i]
    bos = mol.bond_order_sum(i)
    if atom.aromatic:
        if atom.element == "C":
            return max(0, 4 - bos)
        return 0  # plain aromatic n/o/s carry no implicit H
    for v in allowed_valences(atom.element, 0):
        if v >= bos:
            return v - bos
    return -1
