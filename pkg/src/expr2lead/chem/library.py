"""Fragment library loading: parse, sanitize, deduplicate, and keep a record
of rejected entries with reasons."""

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources

from ..errors import EmptyResultError, Expr2LeadError
from .canon import write_smiles
from .mol import Molecule
from .smiles import parse_smiles

log = logging.getLogger(__name__)


@dataclass
class LibraryEntry:
    name: str
    frag_class: str
    smiles: str
    mol: Molecule
    canonical: str


@dataclass
class FragmentLibrary:
    entries: list[LibraryEntry] = field(default_factory=list)
    rejected: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def by_class(self, frag_class):
        return [e for e in self.entries if e.frag_class == frag_class]


def _build(rows) -> FragmentLibrary:
    lib = FragmentLibrary()
    seen = {}
    duplicates = 0
    for row in rows:
        name = row["name"].strip()
        frag_class = row.get("class", "").strip()
        smiles = row["smiles"].strip()
        try:
            mol = parse_smiles(smiles)
            canonical = write_smiles(mol)
        except Expr2LeadError as exc:
            lib.rejected.append({"smiles": smiles, "name": name,
                                 "reason": f"{type(exc).__name__}: {exc}"})
            continue
        if canonical in seen:
            duplicates += 1
            continue
        seen[canonical] = True
        lib.entries.append(LibraryEntry(name, frag_class, smiles, mol,
                                        canonical))
    if duplicates:
        log.info("fragment library: %d duplicate SMILES collapsed", duplicates)
    if lib.rejected:
        log.info("fragment library: %d entries rejected", len(lib.rejected))
    if not lib.entries:
        raise EmptyResultError("no valid fragments in library")
    return lib


def load_fragment_library(path) -> FragmentLibrary:
    """Load from CSV (name,class,smiles) or JSON [{name,class,smiles},...]."""
    text = open(path, encoding="utf-8").read()
    if str(path).endswith(".json"):
        rows = json.loads(text)
    else:
        rows = list(csv.DictReader(text.splitlines()))
    return _build(rows)


def default_fragment_library() -> FragmentLibrary:
    """The packaged 69-entry library."""
    source = resources.files("expr2lead.data").joinpath("fragment_library.csv")
    rows = list(csv.DictReader(source.read_text(encoding="utf-8").splitlines()))
    return _build(rows)
