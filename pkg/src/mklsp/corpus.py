"""Corpus formats and instances.

Two on-disk formats are supported:

* the column token format (CRF++-style): one token per line,
  whitespace-separated columns, sentences separated by a blank line; when a
  file is labeled, the last column is the gold label;
* CoNLL-X: ten tab-separated fields per token
  (ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL PHEAD PDEPREL), ``_`` for a
  missing value.  Only the six named fields are interpreted; the rest are
  preserved on read and echoed back on write.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

Token = tuple[str, ...]
"""A token is its tuple of observation-column strings."""


class CorpusFormatError(ValueError):
    """Raised when an input file violates the corpus format."""


class LabelTable:
    """Bidirectional label <-> id map; ids are assigned in first-seen order."""

    __slots__ = ("_labels", "_ids", "_frozen")

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        self._frozen = False
        for lab in labels:
            self.intern(lab)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        self._frozen = True

    def intern(self, label: str) -> int:
        idx = self._ids.get(label)
        if idx is None:
            if self._frozen:
                raise ValueError(f"label table is frozen; unknown label {label!r}")
            idx = len(self._labels)
            self._ids[label] = idx
            self._labels.append(label)
        return idx

    def id_of(self, label: str) -> int:
        return self._ids[label]

    def label_of(self, idx: int) -> str:
        return self._labels[idx]

    def labels(self) -> list[str]:
        return list(self._labels)

    def __repr__(self) -> str:
        return f"LabelTable({self._labels!r})"


@dataclass
class SequenceInstance:
    """One sentence of the column format.

    `tokens` holds observation columns only; the gold label column (when the
    source file was labeled) lives in `labels` as ids of a `LabelTable`.
    """

    tokens: list[Token]
    labels: list[int] | None = None

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class DependencyInstance:
    """One CoNLL-X sentence.

    `tokens` carries (FORM, LEMMA, CPOSTAG, POSTAG) per word; `heads[i]` is
    the head position of word i+1 (0 = artificial root), or None when the
    source had no annotation.  `fields` keeps the verbatim ten-column rows so
    unparsed fields round-trip.
    """

    tokens: list[Token]
    heads: list[int] | None
    fields: list[list[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)


def _line_iterator(source) -> tuple[Iterator[str], bool]:
    """Accept a path or an open text/byte stream; return (line iter, owns)."""
    if isinstance(source, (str, Path)):
        handle = open(source, "r", encoding="utf-8")
        return iter(handle), True
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):

        def _decode(lines):
            for line in lines:
                yield line.decode("utf-8") if isinstance(line, bytes) else line

        return _decode(source), False
    raise TypeError(f"unsupported corpus source: {type(source)!r}")


def read_sequence_corpus(
    source,
    *,
    expected_columns: int | None = None,
    label_table: LabelTable | None = None,
    labeled: bool = True,
) -> list[SequenceInstance]:
    """Read the column token format.

    When `labeled`, the last column of each line is interned into
    `label_table` (required in that case).  `expected_columns` pins the file
    column count; otherwise the first token line sets it.  Sentences are
    returned in file order.
    """
    if labeled and label_table is None:
        raise ValueError("label_table is required for labeled corpora")
    lines, owns = _line_iterator(source)
    instances: list[SequenceInstance] = []
    tokens: list[Token] = []
    labels: list[int] = []
    n_cols = expected_columns

    def flush() -> None:
        nonlocal tokens, labels
        if tokens:
            instances.append(SequenceInstance(tokens, labels if labeled else None))
            tokens, labels = [], []

    try:
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                flush()
                continue
            cols = line.split()
            if n_cols is None:
                n_cols = len(cols)
            if len(cols) != n_cols:
                raise CorpusFormatError(
                    f"line {lineno}: expected {n_cols} columns, got {len(cols)}"
                )
            if labeled:
                if n_cols < 2:
                    raise CorpusFormatError(
                        f"line {lineno}: a labeled corpus needs at least 2 columns"
                    )
                tokens.append(tuple(cols[:-1]))
                labels.append(label_table.intern(cols[-1]))
            else:
                tokens.append(tuple(cols))
        flush()
    finally:
        if owns and hasattr(lines, "close"):
            lines.close()
    return instances


def write_sequence_corpus(
    instances: Sequence[SequenceInstance],
    dest: IO[str],
    label_table: LabelTable | None = None,
    labels_override: Sequence[Sequence[int]] | None = None,
) -> None:
    """Write the column format back, normalized.

    Normalized means single-space column separators and a blank line after
    every sentence.  A label column is appended when label ids are available
    (from `labels_override` or the instances) and `label_table` is given.
    """
    for i, inst in enumerate(instances):
        ids = labels_override[i] if labels_override is not None else inst.labels
        for t, token in enumerate(inst.tokens):
            parts = list(token)
            if ids is not None:
                if label_table is None:
                    raise ValueError("label_table is required to write labels")
                parts.append(label_table.label_of(ids[t]))
            dest.write(" ".join(parts))
            dest.write("\n")
        dest.write("\n")


def heads_form_tree(heads: Sequence[int]) -> bool:
    """True when every token reaches the root 0 without cycles.

    Assumes values already range-checked to [0, len(heads)].  Multiple
    children of the root are allowed.
    """
    n = len(heads)
    state = [0] * (n + 1)  # 0 unvisited, 1 on current path, 2 done
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return False
        for visited in path:
            state[visited] = 2
    return True


_CONLL_FIELDS = 10
_HEAD_FIELD = 6


def read_dependency_corpus(source) -> list[DependencyInstance]:
    """Read CoNLL-X sentences.

    HEAD must be all-annotated or all ``_`` within a sentence (the latter for
    prediction input).  Annotated heads must encode a tree rooted at 0.
    """
    lines, owns = _line_iterator(source)
    instances: list[DependencyInstance] = []
    rows: list[tuple[int, list[str]]] = []

    def flush() -> None:
        nonlocal rows
        if not rows:
            return
        sent_no = len(instances) + 1
        n = len(rows)
        tokens: list[Token] = []
        raw_heads: list[str] = []
        fields: list[list[str]] = []
        for i, (lineno, cols) in enumerate(rows):
            if cols[0] != str(i + 1):
                raise CorpusFormatError(
                    f"line {lineno}: ID {cols[0]!r} out of order (expected {i + 1})"
                )
            tokens.append((cols[1], cols[2], cols[3], cols[4]))
            raw_heads.append(cols[_HEAD_FIELD])
            fields.append(cols)
        heads: list[int] | None
        if all(h == "_" for h in raw_heads):
            heads = None
        elif any(h == "_" for h in raw_heads):
            raise CorpusFormatError(
                f"sentence {sent_no}: HEAD must be fully annotated or fully missing"
            )
        else:
            try:
                heads = [int(h) for h in raw_heads]
            except ValueError:
                raise CorpusFormatError(f"sentence {sent_no}: non-integer HEAD") from None
            for h in heads:
                if not 0 <= h <= n:
                    raise CorpusFormatError(
                        f"sentence {sent_no}: HEAD {h} out of range 0..{n}"
                    )
            if not heads_form_tree(heads):
                raise CorpusFormatError(
                    f"sentence {sent_no}: HEAD assignment is not a tree (cycle)"
                )
        instances.append(DependencyInstance(tokens, heads, fields))
        rows = []

    try:
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                flush()
                continue
            cols = line.split("\t")
            if len(cols) != _CONLL_FIELDS:
                raise CorpusFormatError(
                    f"line {lineno}: expected {_CONLL_FIELDS} tab-separated fields, "
                    f"got {len(cols)}"
                )
            rows.append((lineno, cols))
        flush()
    finally:
        if owns and hasattr(lines, "close"):
            lines.close()
    return instances


def write_dependency_corpus(
    instances: Sequence[DependencyInstance],
    dest: IO[str],
    heads_override: Sequence[Sequence[int]] | None = None,
) -> None:
    """Echo CoNLL-X rows, with HEAD replaced when predictions are supplied."""
    for i, inst in enumerate(instances):
        heads = heads_override[i] if heads_override is not None else inst.heads
        for t, cols in enumerate(inst.fields):
            out = list(cols)
            if heads is not None:
                out[_HEAD_FIELD] = str(heads[t])
            dest.write("\t".join(out))
            dest.write("\n")
        dest.write("\n")
