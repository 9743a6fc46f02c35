"""Feature template parsing, instantiation, and per-group alphabets.

Template files follow the CRF++ conventions: one rule per line, ``#`` starts
a comment, blank lines are ignored.  An observation rule looks like
``U02:%x[0,0]`` where ``%x[row,col]`` picks the token ``row`` positions away
from the current one and reads its column ``col``; several macros can be
joined with ``/`` (``U05:%x[-1,0]/%x[0,0]``).  The bare line ``B`` switches
on the label-transition group.  Each rule owns one feature group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

OBSERVATION = "observation"
TRANSITION = "transition"

_MACRO = re.compile(r"^%x\[(-?\d+),(\d+)\]$")


class TemplateError(ValueError):
    """Raised for malformed template files or template/corpus mismatches."""


@dataclass(frozen=True)
class TemplateSpec:
    """One parsed extraction rule."""

    index: str
    kind: str  # OBSERVATION or TRANSITION
    macros: tuple[tuple[int, int], ...] = ()  # (row offset, column)


def parse_templates(text: str) -> list[TemplateSpec]:
    """Parse a template file into specs, preserving file order."""
    specs: list[TemplateSpec] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "B":
            spec = TemplateSpec("B", TRANSITION)
        else:
            index, sep, body = line.partition(":")
            if not sep or not index or not body:
                raise TemplateError(
                    f"line {lineno}: expected 'Index:%x[row,col]/...' or 'B', got {raw!r}"
                )
            macros = []
            for part in body.split("/"):
                m = _MACRO.match(part)
                if m is None:
                    raise TemplateError(f"line {lineno}: malformed macro {part!r}")
                macros.append((int(m.group(1)), int(m.group(2))))
            spec = TemplateSpec(index, OBSERVATION, tuple(macros))
        if spec.index in seen:
            raise TemplateError(f"line {lineno}: duplicate template index {spec.index!r}")
        seen.add(spec.index)
        specs.append(spec)
    return specs


def boundary_symbol(position: int, length: int) -> str | None:
    """Sentinel for positions outside [0, length), None inside."""
    if position < 0:
        return f"_B{position}"
    if position >= length:
        return f"_B+{position - length + 1}"
    return None


def instantiate(spec: TemplateSpec, tokens: Sequence[tuple[str, ...]], t: int) -> str:
    """Feature string for observation template `spec` anchored at position `t`.

    Out-of-range macro positions read the distance-stamped boundary sentinel
    instead of a token column.  Columns must be valid for the corpus (checked
    once by `validate_columns`, not here).
    """
    parts = []
    for row, col in spec.macros:
        pos = t + row
        sym = boundary_symbol(pos, len(tokens))
        parts.append(tokens[pos][col] if sym is None else sym)
    return spec.index + ":" + "/".join(parts)


def validate_columns(specs: Iterable[TemplateSpec], n_columns: int) -> None:
    for spec in specs:
        for _, col in spec.macros:
            if col >= n_columns:
                raise TemplateError(
                    f"template {spec.index}: column {col} out of range "
                    f"(corpus has {n_columns} observation columns)"
                )


class FeatureAlphabet:
    """Interning table for one template group; frozen after corpus indexing."""

    __slots__ = ("group_id", "_ids", "_frozen")

    def __init__(self, group_id: str, strings: Iterable[str] = (), frozen: bool = False):
        self.group_id = group_id
        self._ids: dict[str, int] = {}
        for s in strings:
            if s in self._ids:
                raise ValueError(f"duplicate feature string {s!r}")
            self._ids[s] = len(self._ids)
        self._frozen = frozen

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        self._frozen = True

    def intern(self, s: str) -> int:
        idx = self._ids.get(s)
        if idx is None:
            if self._frozen:
                raise ValueError(f"alphabet {self.group_id} is frozen; cannot add {s!r}")
            idx = len(self._ids)
            self._ids[s] = idx
        return idx

    def lookup(self, s: str) -> int | None:
        return self._ids.get(s)

    def strings(self) -> list[str]:
        # dicts preserve insertion order, which is the id order
        return list(self._ids)

    def __repr__(self) -> str:
        state = "frozen" if self._frozen else "open"
        return f"FeatureAlphabet({self.group_id!r}, {len(self)} entries, {state})"


def index_corpus(specs: Sequence[TemplateSpec], corpus: Sequence) -> list[FeatureAlphabet]:
    """Build one frozen alphabet per observation template, first-seen order.

    `corpus` is a sequence of objects with a `tokens` attribute (list of
    column tuples).  Every feature string instantiated anywhere in the corpus
    is interned.
    """
    if not corpus:
        raise ValueError("cannot index an empty corpus")
    obs = [s for s in specs if s.kind == OBSERVATION]
    validate_columns(obs, len(corpus[0].tokens[0]) if corpus[0].tokens else 0)
    alphabets = [FeatureAlphabet(s.index) for s in obs]
    for inst in corpus:
        tokens = inst.tokens
        for t in range(len(tokens)):
            for spec, alphabet in zip(obs, alphabets):
                alphabet.intern(instantiate(spec, tokens, t))
    for alphabet in alphabets:
        alphabet.freeze()
    return alphabets


def extract_token_features(
    specs: Sequence[TemplateSpec],
    alphabets: Sequence[FeatureAlphabet],
    tokens: Sequence[tuple[str, ...]],
    t: int,
) -> list[int | None]:
    """Per-group firing feature index at position `t` (value 1.0 by convention).

    Unknown strings under a frozen alphabet yield None for that group.
    """
    obs = [s for s in specs if s.kind == OBSERVATION]
    return [
        alphabet.lookup(instantiate(spec, tokens, t))
        for spec, alphabet in zip(obs, alphabets, strict=True)
    ]
