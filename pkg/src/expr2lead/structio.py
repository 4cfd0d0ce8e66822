"""Predicted-structure retrieval and pocket handling: PDB parsing, pLDDT
gating, pocket descriptor ingestion/scoring, and k-means hotspot extraction."""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from .errors import FetchError, ParseError, ValidationError

log = logging.getLogger(__name__)

BASE_URL_ENV = "EXPR2LEAD_STRUCT_BASE_URL"
CACHE_DIR_ENV = "EXPR2LEAD_STRUCT_CACHE"
NO_NETWORK_ENV = "EXPR2LEAD_NO_NETWORK"

POCKET_SCORE_WEIGHTS = {
    "volume": 0.3,
    "depth": 0.2,
    "enclosure": 0.2,   # applied to enclosure * 100
    "hydrophobicity": 0.1,  # applied to hydrophobicity * 100
    "aromaticity": 0.1,
    "donors_acceptors": 0.1,
}

KMEANS_MAX_ITER = 300
KMEANS_SHIFT_TOL = 1e-6


@dataclass
class AtomRecord:
    element: str
    residue: str
    position: np.ndarray
    plddt: float


@dataclass
class ModelStructure:
    atoms: list[AtomRecord]
    accession: str = ""


@dataclass
class PocketDescriptor:
    id: str
    volume: float
    depth: float
    enclosure: float
    hydrophobicity: float
    aromaticity: float
    donors: int
    acceptors: int
    atom_coords: np.ndarray | None = None
    raw_score: float = 0.0
    norm_score: float = 0.0


@dataclass
class HotspotSet:
    pocket_center: np.ndarray
    pocket_radius: float
    centroids: np.ndarray


def parse_pdb(text: str) -> ModelStructure:
    """Fixed-column ATOM/HETATM subset; the temperature factor column is read
    as pLDDT."""
    if not text:
        raise ParseError("empty PDB text")
    atoms = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.startswith(("ATOM", "HETATM")):
            continue
        try:
            x = float(line[30:38])
            y = float(line[38:46])
            z = float(line[46:54])
        except (ValueError, IndexError):
            raise ParseError(f"unparseable coordinates at line {lineno}")
        try:
            b = float(line[60:66])
        except (ValueError, IndexError):
            raise ParseError(f"unparseable temperature factor at line {lineno}")
        element = line[76:78].strip() if len(line) >= 78 else ""
        if not element:
            name = line[12:16].strip()
            element = name[:2].capitalize() if name[:2] in ("CL", "BR") \
                else name[:1]
        residue = f"{line[17:20].strip()}_{line[22:26].strip()}"
        atoms.append(AtomRecord(element, residue,
                                np.array([x, y, z]), b))
    if not atoms:
        raise ParseError("no ATOM/HETATM records found")
    for a in atoms:
        if not np.all(np.isfinite(a.position)):
            raise ParseError("non-finite atom position")
        if not 0.0 <= a.plddt <= 100.0:
            raise ParseError(f"pLDDT {a.plddt} outside [0, 100]")
    return ModelStructure(atoms)


def write_pdb(structure: ModelStructure) -> str:
    lines = []
    for i, a in enumerate(structure.atoms, start=1):
        res, _, num = a.residue.partition("_")
        lines.append(
            f"ATOM  {i:5d} {a.element:<4s}{res:>3s} A{num or 1:>4s}    "
            f"{a.position[0]:8.3f}{a.position[1]:8.3f}{a.position[2]:8.3f}"
            f"{1.0:6.2f}{a.plddt:6.2f}          {a.element:>2s}")
    return "\n".join(lines) + "\n"


def fetch_structure(accession: str, base_url: str | None = None,
                    cache_dir=None) -> ModelStructure:
    """GET {base_url}/{accession} with a local file cache; cache hits never
    touch the network."""
    if not accession:
        raise ValidationError("accession must be non-empty")
    base_url = base_url or os.environ.get(BASE_URL_ENV, "")
    cache_dir = Path(cache_dir or os.environ.get(CACHE_DIR_ENV, ".struct_cache"))
    cache_dir.mkdir(parents=True, exist_ok=True)
    cached = cache_dir / f"{accession}.pdb"
    if cached.exists():
        text = cached.read_text(encoding="utf-8")
    else:
        if os.environ.get(NO_NETWORK_ENV):
            raise FetchError(accession,
                             f"{accession}: cache miss with networking disabled")
        url = f"{base_url.rstrip('/')}/{accession}"
        try:
            resp = requests.get(url, timeout=30)
        except requests.RequestException as exc:
            raise FetchError(accession, f"{accession}: {exc}")
        if resp.status_code != 200:
            raise FetchError(accession,
                             f"{accession}: HTTP {resp.status_code} from {url}")
        text = resp.text
        cached.write_text(text, encoding="utf-8")
    structure = parse_pdb(text)
    structure.accession = accession
    return structure


def qc_plddt(s: ModelStructure, min_mean: float = 70.0):
    if not s.atoms:
        raise ValidationError("structure has no atoms")
    mean = float(np.mean([a.plddt for a in s.atoms]))
    return {"pass": mean >= min_mean, "mean_plddt": mean}


_POCKET_FIELDS = {
    "id": str, "volume": (int, float), "depth": (int, float),
    "enclosure": (int, float), "hydrophobicity": (int, float),
    "aromaticity": (int, float), "donors": int, "acceptors": int,
}


def load_pockets(path) -> list[PocketDescriptor]:
    """Pocket JSON schema: {"pockets": [{id, volume, depth, enclosure,
    hydrophobicity, aromaticity, donors, acceptors, atoms?}, ...]}."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})")
    if "pockets" not in doc or not isinstance(doc["pockets"], list):
        raise ParseError(f"{path}: missing 'pockets' list")
    out = []
    for k, p in enumerate(doc["pockets"]):
        for name, types in _POCKET_FIELDS.items():
            if name not in p:
                raise ParseError(f"{path}: pocket #{k} missing field {name!r}")
            if not isinstance(p[name], types) or isinstance(p[name], bool):
                raise ParseError(f"{path}: pocket #{k} field {name!r} has "
                                 f"wrong type")
        for frac in ("enclosure", "hydrophobicity"):
            if not 0.0 <= p[frac] <= 1.0:
                raise ValidationError(
                    f"{path}: pocket #{k} {frac}={p[frac]} outside [0, 1]")
        for nonneg in ("volume", "depth"):
            if p[nonneg] < 0:
                raise ValidationError(
                    f"{path}: pocket #{k} {nonneg} must be >= 0")
        coords = None
        if "atoms" in p and p["atoms"] is not None:
            coords = np.asarray(p["atoms"], dtype=float)
            if coords.ndim != 2 or coords.shape[1] != 3:
                raise ParseError(f"{path}: pocket #{k} atoms must be Nx3")
        out.append(PocketDescriptor(
            id=p["id"], volume=float(p["volume"]), depth=float(p["depth"]),
            enclosure=float(p["enclosure"]),
            hydrophobicity=float(p["hydrophobicity"]),
            aromaticity=float(p["aromaticity"]),
            donors=int(p["donors"]), acceptors=int(p["acceptors"]),
            atom_coords=coords))
    return out


def composite_score(p: PocketDescriptor) -> float:
    w = POCKET_SCORE_WEIGHTS
    return (w["volume"] * p.volume
            + w["depth"] * p.depth
            + w["enclosure"] * p.enclosure * 100.0
            + w["hydrophobicity"] * p.hydrophobicity * 100.0
            + w["aromaticity"] * p.aromaticity
            + w["donors_acceptors"] * (p.donors + p.acceptors))


def score_pockets(pockets: list[PocketDescriptor],
                  top_k: int = 3) -> list[PocketDescriptor]:
    """Composite raw score, min-max normalized over the set (single pocket
    maps to 1.0), sorted descending, top_k returned."""
    if not pockets:
        raise ValidationError("score_pockets needs at least one pocket")
    raws = [composite_score(p) for p in pockets]
    lo, hi = min(raws), max(raws)
    span = hi - lo
    for p, raw in zip(pockets, raws):
        p.raw_score = raw
        p.norm_score = 1.0 if span == 0 else (raw - lo) / span
    ranked = sorted(pockets, key=lambda p: (-p.raw_score, p.id))
    return ranked[:top_k]


def kmeans_hotspots(coords, k: int = 4, seed: int = 0) -> HotspotSet:
    """Lloyd's algorithm with k-means++ seeding; deterministic for a fixed
    seed. Empty clusters are reseeded to the point farthest from its
    centroid."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise ValidationError("coords must be an Nx3 array")
    n = coords.shape[0]
    if n < k:
        raise ValidationError(f"need at least k={k} points, got {n}")
    rng = np.random.RandomState(seed & 0xFFFFFFFF)
    centroids = _kmeanspp_init(coords, k, rng)
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((coords[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = coords[assign == c]
            if len(members) == 0:
                far = int(d2[np.arange(n), assign].argmax())
                new_centroids[c] = coords[far]
            else:
                new_centroids[c] = members.mean(axis=0)
        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        if shift < KMEANS_SHIFT_TOL:
            break
    center = coords.mean(axis=0)
    radius = float(np.linalg.norm(coords - center, axis=1).max())
    return HotspotSet(center, radius, centroids)


def _kmeanspp_init(coords, k, rng):
    n = coords.shape[0]
    centroids = [coords[rng.randint(n)]]
    for _ in range(1, k):
        d2 = np.min(((coords[:, None, :] -
                      np.array(centroids)[None, :, :]) ** 2).sum(axis=2),
                    axis=1)
        total = d2.sum()
        if total <= 0:
            centroids.append(coords[rng.randint(n)])
            continue
        probs = d2 / total
        idx = rng.choice(n, p=probs)
        centroids.append(coords[idx])
    return np.array(centroids)


def kmeans_inertia(coords, centroids):
    coords = np.asarray(coords, dtype=float)
    d2 = ((coords[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())
