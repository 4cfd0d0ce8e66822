"""3D conformers: embedding, harmonic relaxation, strain scoring, Rodrigues
alignment, and geometric pocket fit.

The force field is a deliberate surrogate: harmonic bond and angle terms plus
a soft nonbonded repulsion. It only has to produce sensible relative per-atom
strain, not physical energies.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .chem.mol import Molecule

# ideal bond lengths (Å) keyed by sorted element pair and order class
BOND_LENGTHS = {
    ("C", "C", 1): 1.54,
    ("C", "C", 2): 1.34,
    ("C", "C", 3): 1.20,
    ("C", "C", "ar"): 1.39,
    ("C", "N", 1): 1.47,
    ("C", "N", 2): 1.28,
    ("C", "N", 3): 1.16,
    ("C", "N", "ar"): 1.34,
    ("C", "O", 1): 1.43,
    ("C", "O", 2): 1.23,
    ("C", "O", "ar"): 1.36,
    ("C", "S", 1): 1.82,
    ("C", "S", "ar"): 1.71,
    ("C", "F", 1): 1.35,
    ("C", "Cl", 1): 1.77,
    ("C", "Br", 1): 1.94,
    ("C", "I", 1): 2.14,
    ("N", "N", 1): 1.45,
    ("N", "N", "ar"): 1.35,
    ("N", "O", 1): 1.40,
    ("N", "S", 1): 1.63,
    ("O", "S", 1): 1.58,
    ("O", "S", 2): 1.45,
    ("O", "P", 1): 1.63,
    ("C", "P", 1): 1.84,
    ("C", "B", 1): 1.56,
    ("N", "S", "ar"): 1.60,
}
DEFAULT_BOND_LENGTH = 1.50

BOND_K = 300.0       # per Å²
ANGLE_K = 30.0       # per rad²
NONBOND_K = 25.0     # per Å²
NONBOND_RMIN = 2.2   # Å
GRAD_TOL = 1e-4
STALL_GRAD_TOL = 0.1
STRAIN_SCALE = 0.5   # surrogate units per heavy atom giving penalty 0.5


@dataclass
class Conformer:
    positions: np.ndarray  # (n, 3) Å
    residual_energy: float = 0.0
    converged: bool = True

    def copy(self):
        return Conformer(self.positions.copy(), self.residual_energy,
                         self.converged)


def ideal_bond_length(mol, bond):
    ea = mol.atoms[bond.a].element
    eb = mol.atoms[bond.b].element
    key = tuple(sorted((ea, eb)))
    order = "ar" if bond.aromatic else bond.order
    return BOND_LENGTHS.get((key[0], key[1], order),
                            BOND_LENGTHS.get((key[0], key[1], 1),
                                             DEFAULT_BOND_LENGTH))


def _ideal_angle(mol, center):
    atom = mol.atoms[center]
    if atom.aromatic or any(b.order == 2 for _, b in mol.neighbors(center)):
        return math.radians(120.0)
    if any(b.order == 3 for _, b in mol.neighbors(center)):
        return math.radians(180.0)
    return math.radians(109.5)


def _angle_triples(mol):
    triples = []
    for j in range(len(mol.atoms)):
        nbrs = sorted(mol.neighbor_indices(j))
        for x in range(len(nbrs)):
            for y in range(x + 1, len(nbrs)):
                triples.append((nbrs[x], j, nbrs[y]))
    return triples


def _nonbonded_pairs(mol):
    n = len(mol.atoms)
    excluded = set()
    for b in mol.bonds:
        excluded.add(frozenset((b.a, b.b)))
    for i, j, k in _angle_triples(mol):
        excluded.add(frozenset((i, k)))
    return [(i, j) for i in range(n) for j in range(i + 1, n)
            if frozenset((i, j)) not in excluded]


class ForceField:
    """Precomputed topology (bond, angle, nonbonded terms) for one molecule;
    energy/gradient evaluation is fully vectorized."""

    def __init__(self, mol: Molecule):
        self.n = len(mol.atoms)
        self.bond_idx = np.array([(b.a, b.b) for b in mol.bonds],
                                 dtype=int).reshape(-1, 2)
        self.bond_l0 = np.array([ideal_bond_length(mol, b)
                                 for b in mol.bonds])
        triples = _angle_triples(mol)
        self.angle_idx = np.array(triples, dtype=int).reshape(-1, 3)
        self.angle_t0 = np.array([_ideal_angle(mol, j)
                                  for _, j, _ in triples])
        self.nb_idx = np.array(_nonbonded_pairs(mol),
                               dtype=int).reshape(-1, 2)

    def energy_and_gradient(self, pos: np.ndarray):
        grad = np.zeros_like(pos)
        energy = 0.0
        if len(self.bond_idx):
            ia, ib = self.bond_idx[:, 0], self.bond_idx[:, 1]
            d = pos[ia] - pos[ib]
            l = np.linalg.norm(d, axis=1)
            safe = np.maximum(l, 1e-12)
            diff = l - self.bond_l0
            energy += BOND_K * float(np.sum(diff ** 2))
            g = (2.0 * BOND_K * diff / safe)[:, None] * d
            np.add.at(grad, ia, g)
            np.add.at(grad, ib, -g)
        if len(self.angle_idx):
            i, j, k = (self.angle_idx[:, 0], self.angle_idx[:, 1],
                       self.angle_idx[:, 2])
            rij = pos[i] - pos[j]
            rkj = pos[k] - pos[j]
            nij = np.maximum(np.linalg.norm(rij, axis=1), 1e-12)
            nkj = np.maximum(np.linalg.norm(rkj, axis=1), 1e-12)
            cos_t = np.clip(np.sum(rij * rkj, axis=1) / (nij * nkj),
                            -1.0, 1.0)
            theta = np.arccos(cos_t)
            diff = theta - self.angle_t0
            energy += ANGLE_K * float(np.sum(diff ** 2))
            sin_t = np.sqrt(np.maximum(1.0 - cos_t ** 2, 1e-12))
            dcos_di = rkj / (nij * nkj)[:, None] \
                - (cos_t / nij ** 2)[:, None] * rij
            dcos_dk = rij / (nij * nkj)[:, None] \
                - (cos_t / nkj ** 2)[:, None] * rkj
            coeff = (2.0 * ANGLE_K * diff * (-1.0 / sin_t))[:, None]
            gi = coeff * dcos_di
            gk = coeff * dcos_dk
            np.add.at(grad, i, gi)
            np.add.at(grad, k, gk)
            np.add.at(grad, j, -(gi + gk))
        if len(self.nb_idx):
            i, j = self.nb_idx[:, 0], self.nb_idx[:, 1]
            d = pos[i] - pos[j]
            r = np.maximum(np.linalg.norm(d, axis=1), 1e-12)
            overlap = np.maximum(NONBOND_RMIN - r, 0.0)
            energy += NONBOND_K * float(np.sum(overlap ** 2))
            g = (-2.0 * NONBOND_K * overlap / r)[:, None] * d
            np.add.at(grad, i, g)
            np.add.at(grad, j, -g)
        return energy, grad


def energy_and_gradient(mol: Molecule, pos: np.ndarray):
    return ForceField(mol).energy_and_gradient(pos)


def relax(mol: Molecule, conf: Conformer, max_steps: int = 2000) -> Conformer:
    """Gradient descent with backtracking line search; stops at max_steps or
    gradient norm < GRAD_TOL. Flags converged=False on stagnation."""
    pos = conf.positions.copy()
    ff = ForceField(mol)
    energy, grad = ff.energy_and_gradient(pos)
    step = 1e-3
    stalls = 0
    converged = True
    for _ in range(max_steps):
        gnorm = np.linalg.norm(grad)
        if gnorm < GRAD_TOL:
            break
        trial = pos - step * grad
        e_trial, g_trial = ff.energy_and_gradient(trial)
        if e_trial < energy:
            pos, energy, grad = trial, e_trial, g_trial
            step = min(step * 1.2, 0.05)
            stalls = 0
        else:
            step *= 0.5
            stalls += 1
            if stalls >= 50:
                # line search exhausted; accept if the residual gradient is
                # already small, otherwise flag non-convergence
                converged = np.linalg.norm(grad) < STALL_GRAD_TOL
                break
    else:
        converged = np.linalg.norm(grad) < STALL_GRAD_TOL
    return Conformer(pos, residual_energy=energy, converged=converged)


def embed3d(mol: Molecule, seed: int = 0, max_steps: int = 2000) -> Conformer:
    """Breadth-first layout with ideal bond lengths (rings placed as regular
    polygons) plus seeded jitter, then relaxation."""
    if not mol.atoms:
        raise ValidationError("cannot embed an empty molecule")
    rng = np.random.RandomState(seed & 0xFFFFFFFF)
    n = len(mol.atoms)
    pos = np.zeros((n, 3))
    placed = [False] * n

    def place_ring(ring):
        k = len(ring)
        lengths = []
        for t in range(k):
            b = mol.bond_between(ring[t], ring[(t + 1) % k])
            lengths.append(ideal_bond_length(mol, b) if b else 1.4)
        side = float(np.mean(lengths))
        radius = side / (2.0 * math.sin(math.pi / k))
        anchor = next((a for a in ring if placed[a]), None)
        base = pos[anchor] if anchor is not None else np.zeros(3)
        for t, a in enumerate(ring):
            if placed[a]:
                continue
            angle = 2.0 * math.pi * t / k
            pos[a] = base + np.array([radius * math.cos(angle),
                                      radius * math.sin(angle), 0.0])
            pos[a] += rng.normal(scale=0.05, size=3)
            placed[a] = True

    for ring in mol.rings:
        place_ring(list(ring))

    # BFS for the acyclic remainder
    order = []
    seen = set()
    for start in range(n):
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            u = queue.pop(0)
            order.append(u)
            for v in sorted(mol.neighbor_indices(u)):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    for u in order:
        if placed[u]:
            continue
        parents = [v for v in mol.neighbor_indices(u) if placed[v]]
        if not parents:
            pos[u] = rng.normal(scale=0.5, size=3)
            placed[u] = True
            continue
        p = parents[0]
        others = [v for v in mol.neighbor_indices(p) if placed[v] and v != u]
        if others:
            away = sum((pos[p] - pos[v]) / max(np.linalg.norm(pos[p] - pos[v]), 1e-9)
                       for v in others)
            norm = np.linalg.norm(away)
            direction = away / norm if norm > 1e-9 else rng.normal(size=3)
        else:
            direction = rng.normal(size=3)
        direction = direction + rng.normal(scale=0.15, size=3)
        direction /= np.linalg.norm(direction)
        b = mol.bond_between(u, p)
        pos[u] = pos[p] + ideal_bond_length(mol, b) * direction
        placed[u] = True

    if n == 1:
        return Conformer(np.zeros((1, 3)), residual_energy=0.0)
    return relax(mol, Conformer(pos), max_steps=max_steps)


def strain_penalty(mol: Molecule, conf: Conformer) -> float:
    """Per-atom residual energy mapped to [0, 1) via e/(e + e0)."""
    heavy = max(len(mol.atoms), 1)
    e = max(conf.residual_energy, 0.0) / heavy
    return e / (e + STRAIN_SCALE)


def rodrigues_rotation(v_from, v_to) -> np.ndarray:
    """Rotation matrix taking the direction of v_from to v_to."""
    v_from = np.asarray(v_from, dtype=float)
    v_to = np.asarray(v_to, dtype=float)
    nf = np.linalg.norm(v_from)
    nt = np.linalg.norm(v_to)
    if nf < 1e-12 or nt < 1e-12:
        raise ValidationError("rodrigues_rotation requires nonzero vectors")
    u = v_from / nf
    w = v_to / nt
    cross = np.cross(u, w)
    sin_t = np.linalg.norm(cross)
    cos_t = float(np.dot(u, w))
    if sin_t < 1e-12:
        if cos_t > 0.0:
            return np.eye(3)
        # antiparallel: rotate pi about a perpendicular axis chosen by the
        # smallest-component rule
        basis = np.zeros(3)
        basis[int(np.argmin(np.abs(u)))] = 1.0
        axis = np.cross(u, basis)
        axis /= np.linalg.norm(axis)
        K = _cross_matrix(axis)
        return np.eye(3) + 2.0 * (K @ K)  # sin(pi)=0, 1-cos(pi)=2
    axis = cross / sin_t
    K = _cross_matrix(axis)
    return np.eye(3) + sin_t * K + (1.0 - cos_t) * (K @ K)


def _cross_matrix(a):
    return np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])


def align_fragment(conf: Conformer, hotspot, pocket_center) -> Conformer:
    """Translate the coordinate centroid to the pocket center and point the
    principal axis (centroid to farthest atom) at the hotspot."""
    pos = conf.positions
    if len(pos) < 2:
        raise ValidationError("alignment needs at least 2 atoms")
    hotspot = np.asarray(hotspot, dtype=float)
    pocket_center = np.asarray(pocket_center, dtype=float)
    centroid = pos.mean(axis=0)
    centered = pos - centroid
    dists = np.linalg.norm(centered, axis=1)
    far = int(np.argmax(np.round(dists, 9)))  # lowest index wins ties
    axis = centered[far]
    if np.linalg.norm(axis) < 1e-9:
        raise ValidationError("degenerate geometry: all atoms coincident")
    target = hotspot - pocket_center
    if np.linalg.norm(target) < 1e-12:
        rotated = centered
    else:
        rot = rodrigues_rotation(axis, target)
        rotated = centered @ rot.T
    return replace(conf, positions=rotated + pocket_center)


def pocket_fit(conf: Conformer, hotspots) -> float:
    """0.6 * fraction of atoms inside the pocket radius plus 0.4 * softened
    closeness to the nearest hotspot centroid (4.0 Å scale)."""
    pos = conf.positions
    center = np.asarray(hotspots.pocket_center, dtype=float)
    radius = float(hotspots.pocket_radius)
    centroids = np.asarray(hotspots.centroids, dtype=float)
    inside = np.linalg.norm(pos - center, axis=1) <= radius
    f_inside = float(np.mean(inside))
    d = np.linalg.norm(pos[:, None, :] - centroids[None, :, :], axis=2)
    d_hot = float(np.mean(d.min(axis=1)))
    return 0.6 * f_inside + 0.4 * (1.0 - d_hot / (d_hot + 4.0))


def sdf_block(mol: Molecule, conf: Conformer, name: str = "") -> str:
    """One V2000 SDF record (without trailing $$$$)."""
    lines = [name, "  expr2lead", ""]
    lines.append(f"{len(mol.atoms):3d}{len(mol.bonds):3d}  0  0  0  0  0  0"
                 f"  0  0999 V2000")
    for atom, p in zip(mol.atoms, conf.positions):
        lines.append(f"{p[0]:10.4f}{p[1]:10.4f}{p[2]:10.4f} "
                     f"{atom.element:<3s} 0  0  0  0  0  0  0  0  0  0  0  0")
    for b in mol.bonds:
        order = 4 if b.aromatic else b.order
        lines.append(f"{b.a + 1:3d}{b.b + 1:3d}{order:3d}  0")
    charged = [(i + 1, a.charge) for i, a in enumerate(mol.atoms)
               if a.charge != 0]
    if charged:
        entries = "".join(f" {i:3d} {c:3d}" for i, c in charged)
        lines.append(f"M  CHG{len(charged):3d}{entries}")
    lines.append("M  END")
    return "\n".join(lines) + "\n"


def pdb_block(mol: Molecule, conf: Conformer, name: str = "LIG") -> str:
    """HETATM records for a single conformer."""
    lines = []
    for i, (atom, p) in enumerate(zip(mol.atoms, conf.positions), start=1):
        lines.append(
            f"HETATM{i:5d} {atom.element:<4s}{name[:3]:>3s} A   1    "
            f"{p[0]:8.3f}{p[1]:8.3f}{p[2]:8.3f}{1.0:6.2f}{0.0:6.2f}"
            f"          {atom.element:>2s}")
    lines.append("END")
    return "\n".join(lines) + "\n"
