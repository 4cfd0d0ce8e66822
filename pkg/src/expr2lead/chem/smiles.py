"""SMILES reader for the organic subset plus brackets, rings, and branches.

Supported: B C N O P S F Cl Br I (aromatic c n o s p), bracket atoms with
charge and explicit H, ring-closure digits including %nn, branches, and the
bond symbols - = # :. Stereo markers (/ \\ @) are accepted and ignored.
"""

import logging

from ..errors import ParseError
from .mol import Atom, Molecule, ORGANIC_SUBSET, sanitize

log = logging.getLogger(__name__)

_TWO_LETTER = ("Cl", "Br")
_AROMATIC_ORGANIC = {"c": "C", "n": "N", "o": "O", "s": "S", "p": "P"}
_BOND_ORDERS = {"-": 1, "=": 2, "#": 3, ":": 1}


def parse_smiles(s: str, do_sanitize: bool = True) -> Molecule:
    """Parse a SMILES string into a Molecule; sanitizes by default."""
    if not s:
        raise ParseError("empty SMILES string")
    mol = Molecule()
    pos = 0
    prev_atom = None
    pending_bond = None  # (order, aromatic) or None
    stack = []
    ring_open: dict[int, tuple[int, tuple | None, int]] = {}
    saw_stereo = False

    def attach(idx):
        nonlocal prev_atom, pending_bond
        if prev_atom is not None:
            order, aromatic = _default_bond(mol, prev_atom, idx, pending_bond)
            mol.add_bond(prev_atom, idx, order, aromatic)
        prev_atom = idx
        pending_bond = None

    n = len(s)
    while pos < n:
        ch = s[pos]
        if ch in "/\\":
            saw_stereo = True
            pos += 1
            continue
        if ch == "(":
            if prev_atom is None:
                raise ParseError(f"branch opens before any atom at position {pos + 1}")
            stack.append((prev_atom, pos + 1))
            pos += 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError(f"unbalanced ')' at position {pos + 1}")
            prev_atom = stack.pop()[0]
            pos += 1
            continue
        if ch in _BOND_ORDERS:
            pending_bond = (_BOND_ORDERS[ch], ch == ":")
            pos += 1
            continue
        if ch.isdigit() or ch == "%":
            if ch == "%":
                if pos + 2 >= n or not s[pos + 1:pos + 3].isdigit():
                    raise ParseError(f"malformed %nn ring closure at position {pos + 1}")
                num = int(s[pos + 1:pos + 3])
                pos += 3
            else:
                num = int(ch)
                pos += 1
            if prev_atom is None:
                raise ParseError(f"ring closure before any atom at position {pos}")
            if num in ring_open:
                other, open_bond, _ = ring_open.pop(num)
                bond_spec = pending_bond or open_bond
                order, aromatic = _default_bond(mol, other, prev_atom, bond_spec)
                if other == prev_atom:
                    raise ParseError(f"ring bond {num} closes on its own atom")
                mol.add_bond(other, prev_atom, order, aromatic)
                pending_bond = None
            else:
                ring_open[num] = (prev_atom, pending_bond, pos)
                pending_bond = None
            continue
        if ch == "[":
            atom, consumed, stereo = _parse_bracket(s, pos)
            saw_stereo = saw_stereo or stereo
            attach(mol.add_atom(atom))
            pos += consumed
            continue
        matched = False
        for sym in _TWO_LETTER:
            if s.startswith(sym, pos):
                attach(mol.add_atom(Atom(sym)))
                pos += len(sym)
                matched = True
                break
        if matched:
            continue
        if ch in _AROMATIC_ORGANIC:
            attach(mol.add_atom(Atom(_AROMATIC_ORGANIC[ch], aromatic=True)))
            pos += 1
            continue
        if ch.upper() in ORGANIC_SUBSET and ch.isupper():
            attach(mol.add_atom(Atom(ch)))
            pos += 1
            continue
        raise ParseError(f"unknown symbol {ch!r} at position {pos + 1}")

    if stack:
        raise ParseError(f"unbalanced '(' at position {stack[0][1]} in {s!r}")
    if ring_open:
        nums = sorted(ring_open)
        first_pos = min(p for _, _, p in ring_open.values())
        raise ParseError(
            f"unclosed ring bond(s) {nums} (first opened near position {first_pos})")
    if not mol.atoms:
        raise ParseError(f"no atoms in SMILES {s!r}")
    if saw_stereo:
        log.warning("stereochemistry markers in %r were ignored", s)
    return sanitize(mol) if do_sanitize else mol


def _default_bond(mol, a, b, spec):
    if spec is not None:
        return spec
    if mol.atoms[a].aromatic and mol.atoms[b].aromatic:
        return 1, True
    return 1, False


def _parse_bracket(s, start):
    end = s.find("]", start)
    if end < 0:
        raise ParseError(f"unclosed '[' at position {start + 1}")
    body = s[start + 1:end]
    pos = 0
    stereo = False
    # optional isotope digits are consumed and ignored
    while pos < len(body) and body[pos].isdigit():
        pos += 1
    element = None
    aromatic = False
    for sym in _TWO_LETTER:
        if body.startswith(sym, pos):
            element = sym
            pos += len(sym)
            break
    if element is None and pos < len(body):
        ch = body[pos]
        if ch in _AROMATIC_ORGANIC:
            element = _AROMATIC_ORGANIC[ch]
            aromatic = True
            pos += 1
        elif ch.isupper() and ch in ORGANIC_SUBSET:
            element = ch
            pos += 1
    if element is None:
        raise ParseError(f"unknown element in bracket atom at position {start + 1}")
    hcount = 0
    charge = 0
    while pos < len(body):
        ch = body[pos]
        if ch == "@":
            stereo = True
            pos += 1
        elif ch == "H":
            pos += 1
            digits = ""
            while pos < len(body) and body[pos].isdigit():
                digits += body[pos]
                pos += 1
            hcount = int(digits) if digits else 1
        elif ch in "+-":
            sign = 1 if ch == "+" else -1
            pos += 1
            digits = ""
            while pos < len(body) and body[pos].isdigit():
                digits += body[pos]
                pos += 1
            if digits:
                charge += sign * int(digits)
            else:
                charge += sign
                while pos < len(body) and body[pos] == ch:
                    charge += sign
                    pos += 1
        else:
            raise ParseError(
                f"unsupported bracket token {ch!r} at position {start + 1 + pos}")
    atom = Atom(element, charge=charge, aromatic=aromatic, explicit_h=hcount)
    return atom, end - start + 1, stereo
