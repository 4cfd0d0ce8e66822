"""Reaction-first evolutionary assembly of pocket-aligned small molecules.

Population members are fragment-derived molecules embedded in 3D and aligned
to pocket hotspots. Fitness blends a drug-likeness proxy, pocket fit, novelty
against a reference set, conformational strain, and a synthesizability
penalty. Selection is tournament-based with elitist truncation; every random
draw comes from a per-candidate substream so results are bit-identical for a
fixed seed regardless of scheduling.
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .chem import (brics_decompose, descriptors, morgan_fingerprint,
                   parse_smiles, qed, reaction_link, rule_filters, sa_score,
                   safe_merge, sanitize, tanimoto, write_smiles)
from .errors import InitializationError, SanitizeError, ValidationError
from .geom import align_fragment, embed3d, pocket_fit, strain_penalty

log = logging.getLogger(__name__)

PROXY_WEIGHTS = {"qed": 0.4, "logp": 0.2, "mw": 0.2, "rotb": 0.2}
LOGP_BAND = (-0.4, 1.0, 3.0, 5.6)
MW_BAND = (150.0, 250.0, 450.0, 600.0)
ROTB_IDEAL_MAX = 7.0
ROTB_ZERO_AT = 15.0
TOURNAMENT_SIZE = 3
INIT_ATTEMPT_FACTOR = 50
EMBED_MAX_STEPS = 400


@dataclass
class GAConfig:
    population: int = 40
    generations: int = 20
    hotspot_k: int = 4
    w_p: float = 0.45
    w_f: float = 0.35
    w_n: float = 0.15
    w_s: float = 0.2
    lambda_sa: float = 0.1
    p_crossover: float = 0.7
    p_mutation: float = 0.3
    p_reaction_first: float = 0.8
    seed: int = 0
    top_k_report: int = 10

    def __post_init__(self):
        if self.population < 2:
            raise ValidationError("population must be >= 2")
        if self.generations < 0:
            raise ValidationError("generations must be >= 0")
        for name in ("w_p", "w_f", "w_n", "w_s", "lambda_sa"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        for name in ("p_crossover", "p_mutation", "p_reaction_first"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")


@dataclass
class FitnessBreakdown:
    s_proxy: float
    s_fit: float
    s_novelty: float
    s_strain: float
    p_sa: float
    total: float


@dataclass
class Candidate:
    molecule: object
    conformer: object
    smiles: str
    fitness: FitnessBreakdown | None = None
    lineage: dict = field(default_factory=dict)
    fingerprint: object = None
    descriptors: object = None
    qed: float = 0.0
    sa: float = 0.0


@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    mean_pairwise_tanimoto: float
    valid_fraction: float
    operator_counts: dict = field(default_factory=dict)


@dataclass
class RunResult:
    top: list
    stats: list
    config: GAConfig


@dataclass
class EvalContext:
    hotspots: object
    refs: list
    cfg: GAConfig
    lib: object = None


def _trapezoid(x, lo0, lo1, hi1, hi0):
    if x <= lo0 or x >= hi0:
        return 0.0
    if lo1 <= x <= hi1:
        return 1.0
    if x < lo1:
        return (x - lo0) / (lo1 - lo0)
    return (hi0 - x) / (hi0 - hi1)


def logp_desirability(logp: float) -> float:
    return _trapezoid(logp, *LOGP_BAND)


def mw_desirability(mw: float) -> float:
    return _trapezoid(mw, *MW_BAND)


def rotb_desirability(rotb: float) -> float:
    if rotb <= ROTB_IDEAL_MAX:
        return 1.0
    if rotb >= ROTB_ZERO_AT:
        return 0.0
    return (ROTB_ZERO_AT - rotb) / (ROTB_ZERO_AT - ROTB_IDEAL_MAX)


def proxy_score(d, qed_value: float) -> float:
    """Weighted drug-likeness proxy over QED and three property
    desirabilities, each mapped through a trapezoid band."""
    w = PROXY_WEIGHTS
    return (w["qed"] * qed_value
            + w["logp"] * logp_desirability(d.logp)
            + w["mw"] * mw_desirability(d.mw)
            + w["rotb"] * rotb_desirability(d.rot_bonds))


def novelty(fp, refs) -> float:
    """1 - max Tanimoto similarity to the reference set; 1.0 when empty."""
    if not refs:
        return 1.0
    return 1.0 - max(tanimoto(fp, r) for r in refs)


def combine_fitness(cfg: GAConfig, s_proxy, s_fit, s_novelty, s_strain,
                    p_sa) -> float:
    return (cfg.w_p * s_proxy + cfg.w_f * s_fit + cfg.w_n * s_novelty
            - cfg.w_s * s_strain - cfg.lambda_sa * p_sa)


def evaluate(c: Candidate, ctx: EvalContext) -> FitnessBreakdown:
    """Fill in all five fitness terms for an embedded candidate."""
    cfg = ctx.cfg
    d = descriptors(c.molecule)
    c.descriptors = d
    c.qed = qed(d)
    c.sa = sa_score(c.molecule)
    c.fingerprint = morgan_fingerprint(c.molecule)
    s_proxy = proxy_score(d, c.qed)
    s_fit = pocket_fit(c.conformer, ctx.hotspots) if ctx.hotspots else 0.0
    s_nov = novelty(c.fingerprint, ctx.refs)
    s_strain = strain_penalty(c.molecule, c.conformer)
    p_sa = min(max(c.sa / 10.0, 0.0), 1.0)
    total = combine_fitness(cfg, s_proxy, s_fit, s_nov, s_strain, p_sa)
    fb = FitnessBreakdown(s_proxy, s_fit, s_nov, s_strain, p_sa, total)
    c.fitness = fb
    return fb


def _substream(seed: int, *parts) -> np.random.RandomState:
    """Deterministic RNG substream; stable across processes and thread
    counts."""
    key = ":".join(str(p) for p in (seed,) + parts).encode()
    digest = hashlib.blake2b(key, digest_size=4).digest()
    return np.random.RandomState(int.from_bytes(digest, "big"))


def _embed_aligned(mol, ctx: EvalContext, rng) -> Candidate | None:
    """Embed a sanitized molecule, align it to a random hotspot, evaluate."""
    if not mol.sanitized:
        try:
            mol = sanitize(mol)
        except SanitizeError:
            return None
    try:
        conf = embed3d(mol, seed=int(rng.randint(2 ** 31)),
                       max_steps=EMBED_MAX_STEPS)
    except (ValidationError, ValueError):
        return None
    if ctx.hotspots is not None and len(mol.atoms) >= 2:
        centroids = ctx.hotspots.centroids
        hotspot = centroids[int(rng.randint(len(centroids)))]
        conf = align_fragment(conf, hotspot, ctx.hotspots.pocket_center)
    cand = Candidate(mol, conf, write_smiles(mol))
    evaluate(cand, ctx)
    return cand


def init_population(lib, hs, cfg: GAConfig, refs=None) -> list:
    """Seed the population from single library fragments and random
    reaction-linked pairs, each aligned to a uniformly chosen hotspot."""
    if not lib.entries:
        raise InitializationError("fragment library is empty")
    ctx = EvalContext(hs, refs or [], cfg)
    pop = []
    attempts = 0
    cap = INIT_ATTEMPT_FACTOR * cfg.population
    while len(pop) < cfg.population and attempts < cap:
        rng = _substream(cfg.seed, "init", attempts)
        attempts += 1
        if rng.rand() < 0.5 or len(lib.entries) < 2:
            mol = lib.entries[int(rng.randint(len(lib.entries)))].mol.copy()
            operator = "seed_fragment"
        else:
            i, j = rng.randint(len(lib.entries), size=2)
            mol = reaction_link(lib.entries[int(i)].mol,
                                lib.entries[int(j)].mol)
            operator = "seed_link"
            if mol is None:
                continue
        cand = _embed_aligned(mol, ctx, rng)
        if cand is None:
            continue
        cand.lineage = {"parents": [], "operator": operator}
        pop.append(cand)
    if len(pop) < 2:
        raise InitializationError(
            f"only {len(pop)} valid candidates after {attempts} attempts")
    if len(pop) < cfg.population:
        log.warning("initial population short: %d of %d", len(pop),
                    cfg.population)
    return pop


def _merge_chain(frags, rng):
    """Re-merge a shuffled fragment pool into one molecule via pairwise safe
    merges."""
    if not frags:
        return None
    order = list(rng.permutation(len(frags)))
    k = 2 if len(order) < 3 else int(rng.randint(2, min(4, len(order) + 1)))
    picked = [frags[i] for i in order[:k]]
    mol = picked[0].mol
    for frag in picked[1:]:
        attach_a = None
        attach_b = frag.attach[0] if frag.attach else None
        mol = safe_merge(mol, frag.mol, attach_a, attach_b)
        if mol is None:
            return None
    return mol


def crossover(a: Candidate, b: Candidate, rng, cfg: GAConfig):
    """Reaction-first recombination; falls back to fragment shuffling."""
    if rng.rand() < cfg.p_reaction_first:
        child = reaction_link(a.molecule, b.molecule)
        if child is not None:
            return child, "reaction_link"
    pool = brics_decompose(a.molecule) + brics_decompose(b.molecule)
    child = _merge_chain(pool, rng)
    if child is not None:
        return child, "brics_merge"
    return None, None


def mutate(c: Candidate, lib, rng):
    """One of: library fragment injection, conformer re-relaxation, or a
    same-class scaffold hop on a random fragment."""
    mol = c.molecule
    if not mol.sanitized:
        try:
            mol = sanitize(mol)
        except SanitizeError:
            return None, None
    kind = int(rng.randint(3))
    if kind == 0:
        entry = lib.entries[int(rng.randint(len(lib.entries)))]
        child = reaction_link(mol, entry.mol)
        if child is None:
            child = safe_merge(mol, entry.mol)
        return child, "inject"
    if kind == 1:
        return mol, "relax"
    frags = brics_decompose(mol)
    if len(frags) < 2:
        return None, None
    drop = int(rng.randint(len(frags)))
    kept = [f for i, f in enumerate(frags) if i != drop]
    candidates = lib.entries
    entry = candidates[int(rng.randint(len(candidates)))]
    mol = kept[0].mol
    for frag in kept[1:]:
        mol = safe_merge(mol, frag.mol, None,
                         frag.attach[0] if frag.attach else None)
        if mol is None:
            return None, None
    child = reaction_link(mol, entry.mol)
    if child is None:
        child = safe_merge(mol, entry.mol)
    return child, "scaffold_hop"


def _tournament(pop, rng):
    picks = rng.randint(len(pop), size=TOURNAMENT_SIZE)
    return max((pop[int(i)] for i in picks),
               key=lambda c: c.fitness.total)


def step_generation(pop, ctx: EvalContext, cfg: GAConfig,
                    generation: int):
    """Produce cfg.population offspring, evaluate, and keep the top
    cfg.population of parents plus offspring (deduplicated by canonical
    SMILES, so the best parent always survives)."""
    if len(pop) < 2:
        raise ValidationError("step_generation needs a population of >= 2")
    offspring = []
    counts: dict[str, int] = {}
    attempts = 0
    for slot in range(cfg.population):
        rng = _substream(cfg.seed, "gen", generation, slot)
        attempts += 1
        child_mol = None
        operator = None
        parents = []
        if rng.rand() < cfg.p_crossover:
            pa, pb = _tournament(pop, rng), _tournament(pop, rng)
            child_mol, operator = crossover(pa, pb, rng, cfg)
            parents = [pa.smiles, pb.smiles]
        if child_mol is None:
            pa = _tournament(pop, rng)
            child_mol, operator = mutate(pa, ctx.lib, rng)
            parents = [pa.smiles]
        if child_mol is not None and rng.rand() < cfg.p_mutation:
            base = Candidate(child_mol, None, "")
            mutated, mut_op = mutate(base, ctx.lib, rng)
            if mutated is not None:
                child_mol = mutated
                operator = f"{operator}+{mut_op}"
        if child_mol is None:
            counts["failed"] = counts.get("failed", 0) + 1
            continue
        cand = _embed_aligned(child_mol, ctx, rng)
        if cand is None:
            counts["failed"] = counts.get("failed", 0) + 1
            continue
        cand.lineage = {"parents": parents, "operator": operator}
        offspring.append(cand)
        counts[operator] = counts.get(operator, 0) + 1
    if not offspring:
        log.warning("generation %d produced no valid offspring", generation)
        return list(pop), counts, 0.0
    merged = list(pop) + offspring
    merged.sort(key=lambda c: (-c.fitness.total, c.smiles))
    seen = set()
    nxt = []
    for c in merged:
        if c.smiles in seen:
            continue
        seen.add(c.smiles)
        nxt.append(c)
        if len(nxt) == cfg.population:
            break
    if len(nxt) < 2:
        nxt = list(pop)
    valid_fraction = len(offspring) / attempts
    return nxt, counts, valid_fraction


def _mean_pairwise_tanimoto(pop) -> float:
    fps = [c.fingerprint for c in pop]
    n = len(fps)
    if n < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += tanimoto(fps[i], fps[j])
            pairs += 1
    return total / pairs


def run(cfg: GAConfig, lib, hs, refs=None) -> RunResult:
    """Initialize, evolve for cfg.generations, aggregate the best canonical
    structures seen in any generation, and report the top candidates."""
    refs = refs or []
    ctx = EvalContext(hs, refs, cfg, lib)
    pop = init_population(lib, hs, cfg, refs)
    archive: dict[str, Candidate] = {}

    def absorb(candidates):
        for c in candidates:
            prev = archive.get(c.smiles)
            if prev is None or c.fitness.total > prev.fitness.total:
                archive[c.smiles] = c

    absorb(pop)
    stats = []
    for g in range(cfg.generations):
        pop, counts, valid_fraction = step_generation(pop, ctx, cfg, g)
        absorb(pop)
        best = max(c.fitness.total for c in pop)
        mean = sum(c.fitness.total for c in pop) / len(pop)
        stats.append(GenerationStats(
            g, best, mean, _mean_pairwise_tanimoto(pop), valid_fraction,
            counts))
    ranked = sorted(archive.values(),
                    key=lambda c: (-c.fitness.total, c.smiles))
    if refs:
        ranked = [c for c in ranked if c.fitness.s_novelty > 0.0]
    return RunResult(ranked[:cfg.top_k_report], stats, cfg)
