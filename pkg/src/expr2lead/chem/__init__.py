"""From-scratch cheminformatics kernel: SMILES, sanitization, fingerprints,
descriptors, drug-likeness scoring, fragmentation, and safe assembly."""

from .mol import Atom, Bond, Molecule, sanitize
from .smiles import parse_smiles
from .canon import write_smiles, canonical_ranks
from .fingerprint import Fingerprint, morgan_fingerprint, tanimoto
from .descriptors import DescriptorRecord, descriptors
from .qed import qed, desirabilities, geometric_mean
from .sa import sa_score
from .filters import FilterReport, rule_filters
from .brics import Fragment, brics_decompose, cleavable_bonds
from .react import (ReactionTemplateSet, reaction_link, safe_merge, combine,
                    remove_atoms)
from .library import (FragmentLibrary, LibraryEntry, load_fragment_library,
                      default_fragment_library)
