"""Small synthetic corpora with known structure, for tests and demos.

Sequence sentences are two-column (surface form, extra tag) with the label
recoverable from the form; forms repeat across sentences so context
templates carry real signal.  The noise corpus adds a second column whose
values are independent of the labels, giving one informative and one
uninformative feature group.  Dependency sentences are single-verb stars:
the verb heads every noun and hangs off the root.
"""

from __future__ import annotations

import io
import random

from .corpus import (
    LabelTable,
    SequenceInstance,
    read_dependency_corpus,
    read_sequence_corpus,
)

SEQ_TEMPLATES = """\
# surface form, its context, and the second column
U00:%x[0,0]
U01:%x[-1,0]
U02:%x[1,0]
U03:%x[0,1]
B
"""

NOISE_TEMPLATES = """\
# group A reads the informative column, group B the random one
U00:%x[0,0]
U01:%x[0,1]
"""


def sequence_text(
    n: int,
    seed: int,
    *,
    k: int = 3,
    min_len: int = 4,
    max_len: int = 8,
    n_variants: int = 3,
    sticky: float = 0.6,
) -> str:
    """Labeled two-column sentences; the form encodes the label exactly.

    Labels follow a sticky Markov chain so transition and context features
    matter; each label surfaces as one of `n_variants` forms.
    """
    rng = random.Random(seed)
    out = io.StringIO()
    for _ in range(n):
        length = rng.randint(min_len, max_len)
        label = rng.randrange(k)
        for _ in range(length):
            form = f"w{label}v{rng.randrange(n_variants)}"
            extra = f"x{rng.randrange(4)}"
            out.write(f"{form} {extra} L{label}\n")
            if rng.random() >= sticky:
                label = rng.randrange(k)
        out.write("\n")
    return out.getvalue()


def noise_text(
    n: int,
    seed: int,
    *,
    k: int = 3,
    min_len: int = 5,
    max_len: int = 9,
    n_variants: int = 3,
    n_noise: int = 12,
) -> str:
    """Column 0 determines the label; column 1 is label-independent noise."""
    rng = random.Random(seed)
    out = io.StringIO()
    for _ in range(n):
        length = rng.randint(min_len, max_len)
        for _ in range(length):
            label = rng.randrange(k)
            form = f"y{label}v{rng.randrange(n_variants)}"
            noise = f"z{rng.randrange(n_noise)}"
            out.write(f"{form} {noise} L{label}\n")
        out.write("\n")
    return out.getvalue()


def dependency_text(n: int, seed: int, *, min_len: int = 3, max_len: int = 7) -> str:
    """CoNLL-X star sentences: one verb under the root, nouns under the verb."""
    rng = random.Random(seed)
    out = io.StringIO()
    for _ in range(n):
        length = rng.randint(min_len, max_len)
        verb = rng.randint(1, length)
        for i in range(1, length + 1):
            pos = "V" if i == verb else "N"
            form = f"{pos.lower()}{rng.randrange(6)}"
            head = 0 if i == verb else verb
            out.write(
                f"{i}\t{form}\t{form}\t{pos}\t{pos}\t_\t{head}\t_\t_\t_\n"
            )
        out.write("\n")
    return out.getvalue()


def load_sequence(text: str) -> tuple[list[SequenceInstance], LabelTable]:
    table = LabelTable()
    instances = read_sequence_corpus(io.StringIO(text), label_table=table, labeled=True)
    table.freeze()
    return instances, table


def load_dependency(text: str):
    return read_dependency_corpus(io.StringIO(text))
