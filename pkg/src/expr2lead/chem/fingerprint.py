"""Circular (Morgan-style) fingerprints and Tanimoto similarity.

Environment hashing uses a fixed FNV-1a mix so bitsets are stable across
runs and machines; atom invariants are order-free, so isomorphic graphs map
to identical bitsets.
"""

from dataclasses import dataclass, field

from ..errors import ValidationError
from .mol import Molecule

ATOMIC_NUMBER = {
    "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "P": 15, "S": 16,
    "Cl": 17, "Br": 35, "I": 53,
}

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def _mix(values):
    h = _FNV_OFFSET
    for v in values:
        v &= 0xFFFFFFFF
        for shift in (0, 8, 16, 24):
            h ^= (v >> shift) & 0xFF
            h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


@dataclass
class Fingerprint:
    bits: frozenset[int]
    nbits: int = 2048
    radius: int = 2

    def popcount(self):
        return len(self.bits)


def morgan_fingerprint(mol: Molecule, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    if nbits <= 0 or nbits & (nbits - 1):
        raise ValidationError(f"nbits must be a power of two, got {nbits}")
    n = len(mol.atoms)
    ids = []
    for i, atom in enumerate(mol.atoms):
        ids.append(_mix((
            ATOMIC_NUMBER[atom.element],
            mol.degree(i),
            mol.h_count(i),
            atom.charge + 16,
            int(atom.aromatic),
            int(mol.in_ring(i)),
        )))
    bits = set(v % nbits for v in ids)
    for r in range(1, radius + 1):
        new_ids = []
        for i in range(n):
            env = sorted(
                (0 if b.aromatic else b.order, ids[j])
                for j, b in mol.neighbors(i)
            )
            flat = [r, ids[i]]
            for order, nid in env:
                flat.extend((order, nid))
            new_ids.append(_mix(flat))
        ids = new_ids
        bits.update(v % nbits for v in ids)
    return Fingerprint(frozenset(bits), nbits=nbits, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.nbits != b.nbits:
        raise ValidationError(
            f"fingerprint length mismatch: {a.nbits} vs {b.nbits}")
    union = len(a.bits | b.bits)
    if union == 0:
        return 1.0
    return len(a.bits & b.bits) / union
