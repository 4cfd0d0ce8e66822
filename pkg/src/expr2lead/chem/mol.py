"""Molecular graph: atoms, bonds, ring perception, valence checking, aromaticity.

The graph is heavy-atom only; hydrogens are implicit counts resolved during
sanitization. Bond orders are kekulized integers (1/2/3) with a separate
aromatic flag, so valence sums always work on plain integers.
"""

from dataclasses import dataclass, field, replace

from ..errors import SanitizeError

ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_ELEMENTS = {"C", "N", "O", "S"}

# Allowed total valences (bond order sum + hydrogens) per element/charge.
_BASE_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_CHARGED_VALENCES = {
    ("N", 1): (4,),
    ("N", -1): (2,),
    ("O", 1): (3,),
    ("O", -1): (1,),
    ("C", 1): (3,),
    ("C", -1): (3,),
    ("S", 1): (3, 5),
    ("S", -1): (1,),
    ("P", 1): (4,),
    ("F", -1): (0,),
    ("Cl", -1): (0,),
    ("Br", -1): (0,),
    ("I", -1): (0,),
}


def allowed_valences(element, charge=0):
    if charge == 0:
        return _BASE_VALENCES[element]
    return _CHARGED_VALENCES.get((element, charge), _BASE_VALENCES[element])


@dataclass
class Atom:
    element: str
    charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None  # fixed by bracket notation; None = implicit


@dataclass
class Bond:
    a: int
    b: int
    order: int = 1  # kekulized order after sanitize
    aromatic: bool = False

    def other(self, i):
        return self.b if i == self.a else self.a


class Molecule:
    def __init__(self):
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self._adj: dict[int, list[int]] = {}  # atom index -> bond indices
        self.h_counts: list[int] = []
        self.rings: list[tuple[int, ...]] = []
        self.sanitized = False

    # -- construction -----------------------------------------------------

    def add_atom(self, atom: Atom) -> int:
        idx = len(self.atoms)
        self.atoms.append(atom)
        self._adj[idx] = []
        self.sanitized = False
        return idx

    def add_bond(self, a: int, b: int, order: int = 1, aromatic: bool = False):
        if a == b:
            raise SanitizeError(f"self-loop bond on atom {a}")
        if self.bond_between(a, b) is not None:
            raise SanitizeError(f"parallel bond between atoms {a} and {b}")
        idx = len(self.bonds)
        self.bonds.append(Bond(a, b, order, aromatic))
        self._adj[a].append(idx)
        self._adj[b].append(idx)
        self.sanitized = False
        return idx

    def copy(self) -> "Molecule":
        m = Molecule()
        for a in self.atoms:
            m.add_atom(replace(a))
        for b in self.bonds:
            m.add_bond(b.a, b.b, b.order, b.aromatic)
        return m

    # -- queries -----------------------------------------------------------

    def neighbors(self, i):
        return [(self.bonds[bi].other(i), self.bonds[bi]) for bi in self._adj[i]]

    def neighbor_indices(self, i):
        return [self.bonds[bi].other(i) for bi in self._adj[i]]

    def bond_between(self, a, b):
        for bi in self._adj.get(a, ()):
            if self.bonds[bi].other(a) == b:
                return self.bonds[bi]
        return None

    def degree(self, i):
        return len(self._adj[i])

    def bond_order_sum(self, i):
        return sum(self.bonds[bi].order for bi in self._adj[i])

    def h_count(self, i):
        return self.h_counts[i]

    def heavy_atom_count(self):
        return len(self.atoms)

    def ring_membership(self, i):
        return [r for r in self.rings if i in r]

    def in_ring(self, i):
        return any(i in r for r in self.rings)

    def bond_in_ring(self, bond: Bond):
        for r in self.rings:
            n = len(r)
            for k in range(n):
                p, q = r[k], r[(k + 1) % n]
                if {p, q} == {bond.a, bond.b}:
                    return True
        return False


# -- ring perception ------------------------------------------------------


def perceive_rings(mol: Molecule) -> list[tuple[int, ...]]:
    """Smallest ring through every ring bond (SSSR-like, adequate for
    drug-sized molecules). Returns rings as atom-index tuples."""
    rings = set()
    for bond in mol.bonds:
        ring = _smallest_ring_through(mol, bond)
        if ring is not None:
            rings.add(ring)
    return sorted(rings, key=lambda r: (len(r), r))


def _smallest_ring_through(mol: Molecule, bond: Bond):
    # BFS shortest path between endpoints avoiding the bond itself.
    start, goal = bond.a, bond.b
    prev = {start: None}
    queue = [start]
    while queue:
        nxt = []
        for u in queue:
            for bi in mol._adj[u]:
                b = mol.bonds[bi]
                if b is bond:
                    continue
                v = b.other(u)
                if v in prev:
                    continue
                prev[v] = u
                if v == goal:
                    path = [v]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return _canonical_ring(tuple(path))
                nxt.append(v)
        queue = nxt
    return None


def _canonical_ring(ring):
    # rotate/reflect to a canonical tuple so duplicates collapse
    n = len(ring)
    best = None
    doubled = ring + ring
    for i in range(n):
        for seq in (doubled[i:i + n], tuple(reversed(doubled[i:i + n]))):
            if best is None or seq < best:
                best = seq
    return best


# -- sanitization ----------------------------------------------------------


def sanitize(mol: Molecule) -> Molecule:
    """Validate valences, perceive/validate aromaticity, kekulize, assign
    implicit hydrogens. Idempotent; raises SanitizeError on violations."""
    m = mol.copy()
    m.rings = perceive_rings(m)
    _check_aromatic_membership(m)
    _aromatize_kekule_rings(m)
    _kekulize(m)
    _assign_hydrogens(m)
    m.sanitized = True
    return m


def pi_electrons(mol: Molecule, i: int) -> int:
    """Hückel pi contribution of an aromatic ring atom."""
    atom = mol.atoms[i]
    if atom.element == "C":
        return 1 if atom.charge >= 0 else 2
    if atom.element == "N":
        # pyrrole-type (3 connections or explicit H) donates the lone pair
        has_h = (atom.explicit_h or 0) > 0
        if mol.degree(i) == 3 or has_h:
            return 2
        return 1
    if atom.element in ("O", "S"):
        return 2
    return 0


def _aromatic_rings(mol: Molecule):
    out = []
    for ring in mol.rings:
        if len(ring) not in (5, 6):
            continue
        if all(mol.atoms[i].aromatic for i in ring):
            out.append(ring)
    return out


def _check_aromatic_membership(mol: Molecule):
    """Every atom flagged aromatic must sit in at least one 5/6-ring of
    aromatic atoms satisfying the Hückel count of 6."""
    flagged = [i for i, a in enumerate(mol.atoms) if a.aromatic]
    if not flagged:
        return
    for i in flagged:
        if mol.atoms[i].element not in AROMATIC_ELEMENTS:
            raise SanitizeError(
                f"atom {i} ({mol.atoms[i].element}) cannot be aromatic")
    ok = set()
    for ring in _aromatic_rings(mol):
        if sum(pi_electrons(mol, i) for i in ring) == 6:
            ok.update(ring)
    bad = [i for i in flagged if i not in ok]
    if bad:
        raise SanitizeError(
            f"aromatic atoms {bad} are not part of any Hückel-aromatic ring")
    # mark bonds inside validated aromatic rings
    for ring in _aromatic_rings(mol):
        if not all(i in ok for i in ring):
            continue
        n = len(ring)
        for k in range(n):
            b = mol.bond_between(ring[k], ring[(k + 1) % n])
            if b is not None:
                b.aromatic = True


def _aromatize_kekule_rings(mol: Molecule):
    """Promote alternating Kekulé rings (6 pi electrons) to aromatic."""
    changed = True
    while changed:
        changed = False
        for ring in mol.rings:
            if len(ring) not in (5, 6):
                continue
            if all(mol.atoms[i].aromatic for i in ring):
                continue
            if not all(mol.atoms[i].element in AROMATIC_ELEMENTS for i in ring):
                continue
            ring_bonds = []
            n = len(ring)
            for k in range(n):
                b = mol.bond_between(ring[k], ring[(k + 1) % n])
                if b is None or b.order == 3:
                    ring_bonds = None
                    break
                ring_bonds.append(b)
            if ring_bonds is None:
                continue
            pi = 0
            contributes = True
            for i in ring:
                atom = mol.atoms[i]
                has_ring_double = any(
                    b.order == 2 and i in (b.a, b.b) for b in ring_bonds)
                if has_ring_double:
                    pi += 1
                elif atom.element in ("N", "O", "S"):
                    # lone pair donor, but only with no exocyclic double bond
                    if any(bd.order == 2 for _, bd in mol.neighbors(i)):
                        contributes = False
                        break
                    pi += 2
                else:
                    contributes = False
                    break
            if contributes and pi == 6:
                for i in ring:
                    mol.atoms[i].aromatic = True
                for b in ring_bonds:
                    b.aromatic = True
                changed = True


def _needs_double(mol: Molecule, i: int) -> bool:
    atom = mol.atoms[i]
    if not atom.aromatic:
        return False
    if atom.element == "C":
        return atom.charge == 0
    if atom.element == "N":
        return pi_electrons(mol, i) == 1
    return False  # aromatic O/S contribute the lone pair


def _kekulize(mol: Molecule):
    """Assign alternating single/double orders within aromatic systems via
    backtracking matching; every needs-double atom gets exactly one double."""
    arom_bonds = [b for b in mol.bonds if b.aromatic]
    for b in arom_bonds:
        b.order = 1
    need = {i for i in range(len(mol.atoms)) if _needs_double(mol, i)}
    if not need:
        return
    edges = {}
    for b in arom_bonds:
        if b.a in need and b.b in need:
            edges.setdefault(b.a, []).append(b)
            edges.setdefault(b.b, []).append(b)
    matched: dict[int, Bond] = {}

    order = sorted(need, key=lambda i: len(edges.get(i, [])))

    def assign(pos):
        if pos == len(order):
            return True
        u = order[pos]
        if u in matched:
            return assign(pos + 1)
        for b in edges.get(u, []):
            v = b.other(u)
            if v in matched:
                continue
            matched[u] = b
            matched[v] = b
            if assign(pos + 1):
                return True
            del matched[u]
            del matched[v]
        return False

    if not assign(0):
        unmatched = [i for i in need if i not in matched]
        raise SanitizeError(
            f"cannot kekulize aromatic system; unmatched atoms {unmatched}")
    for b in {id(x): x for x in matched.values()}.values():
        b.order = 2


def _assign_hydrogens(mol: Molecule):
    mol.h_counts = []
    for i, atom in enumerate(mol.atoms):
        bos = mol.bond_order_sum(i)
        valences = allowed_valences(atom.element, atom.charge)
        if atom.explicit_h is not None:
            total = bos + atom.explicit_h
            if total > max(valences):
                raise SanitizeError(
                    f"valence {total} exceeds maximum {max(valences)} "
                    f"for atom {i} ({atom.element}, charge {atom.charge:+d})")
            mol.h_counts.append(atom.explicit_h)
        else:
            h = None
            for v in valences:
                if v >= bos:
                    h = v - bos
                    break
            if h is None:
                raise SanitizeError(
                    f"bond order sum {bos} exceeds allowed valences "
                    f"{valences} for atom {i} ({atom.element})")
            if atom.aromatic and atom.element in ("O", "S"):
                h = 0
            mol.h_counts.append(h)
