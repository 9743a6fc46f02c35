"""Edge-factored dependency parsing: edge feature templates, projective
(cubic-time span DP) and non-projective (maximum arborescence) decoders,
parent loss, and the tree-level feature map.

Edge templates reuse the template-file syntax with field selectors instead
of %x macros: ``P03:head.POSTAG/mod.POSTAG``.  Selector anchors are ``head``,
``mod`` (with optional ``+n``/``-n`` token offsets) and ``between`` (no
offset), fields are FORM, LEMMA, CPOSTAG, POSTAG.  A ``between`` selector
emits one feature per distinct field value strictly between head and
modifier.  Every feature string embeds the template index, the attachment
direction, and the bucketed head-modifier distance.
"""

from __future__ import annotations

import importlib.resources
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import DependencyInstance, heads_form_tree
from .sparse import GroupedSparseVector
from .templates import FeatureAlphabet, TemplateError, boundary_symbol

ROOT_TOKEN = ("<root>", "<root>", "<root>", "<root>")
FIELDS = {"FORM": 0, "LEMMA": 1, "CPOSTAG": 2, "POSTAG": 3}
NEG = float("-inf")

_SELECTOR = re.compile(r"^(head|mod|between)([+-]\d+)?\.(FORM|LEMMA|CPOSTAG|POSTAG)$")


@dataclass(frozen=True)
class EdgeSelector:
    anchor: str  # "head" | "mod" | "between"
    offset: int
    column: int


@dataclass(frozen=True)
class EdgeTemplateSpec:
    index: str
    selectors: tuple[EdgeSelector, ...]

    @property
    def between_column(self) -> int | None:
        for sel in self.selectors:
            if sel.anchor == "between":
                return sel.column
        return None


def parse_edge_templates(text: str) -> list[EdgeTemplateSpec]:
    """Parse edge templates, preserving file order."""
    specs: list[EdgeTemplateSpec] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        index, sep, body = line.partition(":")
        if not sep or not index or not body:
            raise TemplateError(f"line {lineno}: expected 'Index:selector/...', got {raw!r}")
        selectors = []
        n_between = 0
        for part in body.split("/"):
            m = _SELECTOR.match(part)
            if m is None:
                raise TemplateError(f"line {lineno}: malformed selector {part!r}")
            anchor, offset, fieldname = m.group(1), m.group(2), m.group(3)
            if anchor == "between":
                if offset is not None:
                    raise TemplateError(f"line {lineno}: 'between' takes no offset")
                n_between += 1
                if n_between > 1:
                    raise TemplateError(f"line {lineno}: at most one 'between' selector")
            selectors.append(EdgeSelector(anchor, int(offset or 0), FIELDS[fieldname]))
        if index in seen:
            raise TemplateError(f"line {lineno}: duplicate template index {index!r}")
        seen.add(index)
        specs.append(EdgeTemplateSpec(index, tuple(selectors)))
    return specs


def default_edge_templates() -> str:
    """The template file shipped with the package."""
    return (
        importlib.resources.files("mklsp")
        .joinpath("data/parse_templates.txt")
        .read_text(encoding="utf-8")
    )


def distance_bucket(distance: int) -> int:
    """Bucket |head - mod|: exact below 5, then 5 for [5,10), 10 for >= 10."""
    if distance >= 10:
        return 10
    if distance >= 5:
        return 5
    return distance


def augment(tokens: Sequence[tuple[str, ...]]) -> list[tuple[str, ...]]:
    """Positions 0..l with the synthetic root token at 0."""
    return [ROOT_TOKEN, *tokens]


def instantiate_edge(
    spec: EdgeTemplateSpec, aug_tokens: Sequence[tuple[str, ...]], u: int, v: int
) -> list[str]:
    """Feature strings for edge head u -> modifier v over augmented tokens.

    Without a ``between`` selector the result is a singleton; with one it has
    one entry per distinct between-field value (left-to-right first seen),
    and none at all for adjacent pairs.
    """
    n = len(aug_tokens)
    direction = "R" if u < v else "L"
    dist = distance_bucket(abs(u - v))
    parts: list[str | None] = []
    for sel in spec.selectors:
        if sel.anchor == "between":
            parts.append(None)
            continue
        pos = (u if sel.anchor == "head" else v) + sel.offset
        sym = boundary_symbol(pos, n)
        parts.append(aug_tokens[pos][sel.column] if sym is None else sym)
    prefix = f"{spec.index}:{direction}:{dist}:"
    between_col = spec.between_column
    if between_col is None:
        return [prefix + "/".join(parts)]
    lo, hi = (u, v) if u < v else (v, u)
    out: list[str] = []
    seen: set[str] = set()
    for pos in range(lo + 1, hi):
        value = aug_tokens[pos][between_col]
        if value in seen:
            continue
        seen.add(value)
        out.append(prefix + "/".join(value if p is None else p for p in parts))
    return out


class EdgeFeatureExtractor:
    """Edge templates plus their frozen alphabets."""

    def __init__(self, specs: Sequence[EdgeTemplateSpec], alphabets: Sequence[FeatureAlphabet]):
        self.specs = list(specs)
        self.alphabets = list(alphabets)
        if len(self.specs) != len(self.alphabets):
            raise ValueError("one alphabet per edge template required")

    @classmethod
    def build(
        cls, specs: Sequence[EdgeTemplateSpec], corpus: Sequence[DependencyInstance]
    ) -> "EdgeFeatureExtractor":
        """Index every candidate edge of every sentence, first-seen order."""
        if not corpus:
            raise ValueError("cannot index an empty corpus")
        if not specs:
            raise ValueError("template file defines no feature groups")
        alphabets = [FeatureAlphabet(s.index) for s in specs]
        for inst in corpus:
            toks = augment(inst.tokens)
            n = len(toks)
            for u in range(n):
                for v in range(1, n):
                    if u == v:
                        continue
                    for spec, alphabet in zip(specs, alphabets):
                        for s in instantiate_edge(spec, toks, u, v):
                            alphabet.intern(s)
        for alphabet in alphabets:
            alphabet.freeze()
        return cls(specs, alphabets)

    def edge_feature_map(
        self, aug_tokens: Sequence[tuple[str, ...]], u: int, v: int
    ) -> list[list[int]]:
        """Per-group firing feature indices for one edge (unknowns dropped)."""
        out = []
        for spec, alphabet in zip(self.specs, self.alphabets, strict=True):
            ids = []
            for s in instantiate_edge(spec, aug_tokens, u, v):
                idx = alphabet.lookup(s)
                if idx is not None:
                    ids.append(idx)
            out.append(ids)
        return out


def parent_loss(gold: Sequence[int], other: Sequence[int]) -> float:
    """Number of tokens whose head differs."""
    if len(gold) != len(other):
        raise ValueError("head sequences differ in length")
    return float(sum(a != b for a, b in zip(gold, other)))


def is_arborescence(heads: Sequence[int]) -> bool:
    """Heads in range, no token its own head, every token reaches root 0."""
    n = len(heads)
    for v, h in enumerate(heads, start=1):
        if not 0 <= h <= n or h == v:
            return False
    return heads_form_tree(list(heads))


def is_projective(heads: Sequence[int]) -> bool:
    """No two edges cross (intervals nest or are disjoint)."""
    edges = [(min(h, v), max(h, v)) for v, h in enumerate(heads, start=1)]
    for i in range(len(edges)):
        a1, b1 = edges[i]
        for a2, b2 in edges[i + 1 :]:
            if a1 < a2 < b1 < b2 or a2 < a1 < b2 < b1:
                return False
    return True


def _masked(scores: np.ndarray) -> np.ndarray:
    S = np.array(scores, dtype=float, copy=True)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 2:
        raise ValueError("scores must be (l+1) x (l+1) with l >= 1")
    S[:, 0] = NEG
    np.fill_diagonal(S, NEG)
    return S


def eisner_decode(scores: np.ndarray) -> tuple[list[int], float]:
    """Highest-scoring projective tree by the complete/incomplete span DP.

    `scores[u, v]` is the score of attaching modifier v (1..l) to head u
    (0..l); column 0 and the diagonal are ignored.  Ties are resolved by the
    fixed iteration order (first maximum wins), which is deterministic but
    carries no lexicographic guarantee.
    """
    S = _masked(scores)
    n = S.shape[0]
    IL = np.full((n, n), NEG)
    IR = np.full((n, n), NEG)
    CL = np.full((n, n), NEG)
    CR = np.full((n, n), NEG)
    np.fill_diagonal(CL, 0.0)
    np.fill_diagonal(CR, 0.0)
    bI = np.zeros((n, n), dtype=np.int64)
    bCL = np.zeros((n, n), dtype=np.int64)
    bCR = np.zeros((n, n), dtype=np.int64)

    for span in range(1, n):
        for s in range(0, n - span):
            t = s + span
            vals = CR[s, s:t] + CL[s + 1 : t + 1, t]
            r = int(np.argmax(vals))
            bI[s, t] = s + r
            IR[s, t] = vals[r] + S[s, t]
            IL[s, t] = vals[r] + S[t, s]  # NEG when s == 0 via the mask
            valsL = CL[s, s:t] + IL[s:t, t]
            rL = int(np.argmax(valsL))
            bCL[s, t] = s + rL
            CL[s, t] = valsL[rL]
            valsR = IR[s, s + 1 : t + 1] + CR[s + 1 : t + 1, t]
            rR = int(np.argmax(valsR))
            bCR[s, t] = s + 1 + rR
            CR[s, t] = valsR[rR]

    heads = [0] * (n - 1)

    def backtrack(s: int, t: int, state: str) -> None:
        if s == t:
            return
        if state == "CR":
            r = bCR[s, t]
            backtrack(s, r, "IR")
            backtrack(r, t, "CR")
        elif state == "CL":
            r = bCL[s, t]
            backtrack(s, r, "CL")
            backtrack(r, t, "IL")
        elif state == "IR":
            heads[t - 1] = s
            r = bI[s, t]
            backtrack(s, r, "CR")
            backtrack(r + 1, t, "CL")
        else:  # IL
            heads[s - 1] = t
            r = bI[s, t]
            backtrack(s, r, "CR")
            backtrack(r + 1, t, "CL")

    backtrack(0, n - 1, "CR")
    return heads, float(CR[0, n - 1])


def cle_decode(scores: np.ndarray) -> tuple[list[int], float]:
    """Maximum spanning arborescence rooted at 0 (greedy + cycle contraction).

    Root out-degree is unconstrained.  Greedy head selection takes the
    smallest head index among ties.
    """
    S = _masked(scores)
    heads_full = _cle(S)
    heads = [int(h) for h in heads_full[1:]]
    total = float(sum(S[h, v] for v, h in enumerate(heads, start=1)))
    return heads, total


def _cle(S: np.ndarray) -> np.ndarray:
    n = S.shape[0]
    bh = np.zeros(n, dtype=np.int64)
    bh[0] = -1
    for v in range(1, n):
        bh[v] = int(np.argmax(S[:, v]))

    cycle = _find_cycle(bh)
    if cycle is None:
        return bh

    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    outside = [v for v in range(n) if not in_cycle[v]]  # keeps 0 first
    m = len(outside) + 1
    c = m - 1  # supernode id
    old_of = {new: old for new, old in enumerate(outside)}

    S2 = np.full((m, m), NEG)
    for a_new, a_old in enumerate(outside):
        for b_new, b_old in enumerate(outside):
            if a_new != b_new:
                S2[a_new, b_new] = S[a_old, b_old]
    enter_choice: dict[int, int] = {}  # outside node -> replaced cycle node
    exit_choice: dict[int, int] = {}  # outside node -> cycle node heading it
    for a_new, a_old in enumerate(outside):
        # edge into the cycle: gain from replacing v's current cycle edge
        gains = [S[a_old, v] - S[bh[v], v] for v in cycle]
        best = int(np.argmax(gains))
        enter_choice[a_old] = cycle[best]
        S2[a_new, c] = gains[best]
        # edge out of the cycle
        if a_old != 0:
            outs = [S[v, a_old] for v in cycle]
            best_out = int(np.argmax(outs))
            S2[c, a_new] = outs[best_out]
            exit_choice[a_old] = cycle[best_out]

    sub = _cle(S2)

    heads = np.zeros(n, dtype=np.int64)
    heads[0] = -1
    for a_new, a_old in enumerate(outside):
        if a_old == 0:
            continue
        h_new = int(sub[a_new])
        heads[a_old] = exit_choice[a_old] if h_new == c else old_of[h_new]
    for v in cycle:
        heads[v] = bh[v]
    entry_parent = old_of[int(sub[c])]
    heads[enter_choice[entry_parent]] = entry_parent
    return heads


def _find_cycle(bh: np.ndarray) -> list[int] | None:
    n = bh.size
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on path, 2 done
    state[0] = 2
    for start in range(1, n):
        path = []
        v = start
        while state[v] == 0:
            state[v] = 1
            path.append(v)
            v = int(bh[v])
        if state[v] == 1:
            cycle = path[path.index(v) :]
            return cycle
        for p in path:
            state[p] = 2
    return None


def decode_single_root(scores: np.ndarray, projective: bool) -> tuple[list[int], float]:
    """Best tree with exactly one child of the root (re-run per candidate)."""
    S = np.asarray(scores, dtype=float)
    n = S.shape[0]
    decode = eisner_decode if projective else cle_decode
    best: tuple[list[int], float] | None = None
    for child in range(1, n):
        masked = S.copy()
        keep = masked[0, child]
        masked[0, :] = NEG
        masked[0, child] = keep
        heads, total = decode(masked)
        if best is None or total > best[1]:
            best = (heads, total)
    assert best is not None
    return best


@dataclass
class CompiledDependency:
    """A sentence reduced to COO-style per-group edge features."""

    n: int  # token count, excluding root
    group_edges: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # (u, v, feat)
    gold: np.ndarray | None
    gold_map: GroupedSparseVector | None = field(default=None, repr=False)


class DependencyTask:
    """Binds an edge feature extractor and a decoder choice for one model."""

    def __init__(
        self,
        extractor: EdgeFeatureExtractor,
        decoder: str = "projective",
        single_root: bool = False,
    ):
        if decoder not in ("projective", "nonprojective"):
            raise ValueError(f"unknown decoder {decoder!r}")
        self.extractor = extractor
        self.decoder = decoder
        self.single_root = single_root

    @classmethod
    def build(
        cls,
        specs: Sequence[EdgeTemplateSpec],
        corpus: Sequence[DependencyInstance],
        decoder: str = "projective",
        single_root: bool = False,
    ) -> "DependencyTask":
        return cls(EdgeFeatureExtractor.build(specs, corpus), decoder, single_root)

    @property
    def n_groups(self) -> int:
        return len(self.extractor.specs)

    @property
    def group_ids(self) -> list[str]:
        return [s.index for s in self.extractor.specs]

    @property
    def group_dims(self) -> list[int]:
        return [len(a) for a in self.extractor.alphabets]

    def compile(self, instance: DependencyInstance) -> CompiledDependency:
        toks = augment(instance.tokens)
        n = len(instance.tokens)
        m = self.n_groups
        us: list[list[int]] = [[] for _ in range(m)]
        vs: list[list[int]] = [[] for _ in range(m)]
        fs: list[list[int]] = [[] for _ in range(m)]
        for u in range(n + 1):
            for v in range(1, n + 1):
                if u == v:
                    continue
                for j, ids in enumerate(self.extractor.edge_feature_map(toks, u, v)):
                    for idx in ids:
                        us[j].append(u)
                        vs[j].append(v)
                        fs[j].append(idx)
        group_edges = [
            (
                np.asarray(us[j], dtype=np.int64),
                np.asarray(vs[j], dtype=np.int64),
                np.asarray(fs[j], dtype=np.int64),
            )
            for j in range(m)
        ]
        gold = None
        if instance.heads is not None:
            gold = np.asarray(instance.heads, dtype=np.int64)
        return CompiledDependency(n, group_edges, gold)

    def edge_scores(
        self, weights: Sequence[np.ndarray], inst: CompiledDependency
    ) -> np.ndarray:
        """Dense (n+1) x (n+1) edge score matrix (column 0 / diagonal unused)."""
        S = np.zeros((inst.n + 1, inst.n + 1))
        for w, (u, v, f) in zip(weights, inst.group_edges, strict=True):
            if f.size:
                np.add.at(S, (u, v), w[f])
        return S

    def joint_feature_map(
        self, inst: CompiledDependency, heads: Sequence[int]
    ) -> GroupedSparseVector:
        """Summed edge features over the tree's edges (frequency values)."""
        if len(heads) != inst.n:
            raise ValueError("tree size does not match the sentence")
        harr = np.asarray(heads, dtype=np.int64)
        dicts: list[dict[int, float]] = []
        for u, v, f in inst.group_edges:
            d: dict[int, float] = {}
            if f.size:
                on_tree = harr[v - 1] == u
                for idx in f[on_tree]:
                    key = int(idx)
                    d[key] = d.get(key, 0.0) + 1.0
            dicts.append(d)
        return GroupedSparseVector.from_dicts(dicts)

    def _run_decoder(self, S: np.ndarray) -> tuple[list[int], float]:
        if self.single_root:
            return decode_single_root(S, self.decoder == "projective")
        if self.decoder == "projective":
            return eisner_decode(S)
        return cle_decode(S)

    # --- solver-facing protocol ---

    def gold_output(self, inst: CompiledDependency) -> list[int]:
        if inst.gold is None:
            raise ValueError("instance has no gold heads")
        return [int(h) for h in inst.gold]

    def gold_feature_map(self, inst: CompiledDependency) -> GroupedSparseVector:
        if inst.gold_map is None:
            inst.gold_map = self.joint_feature_map(inst, self.gold_output(inst))
        return inst.gold_map

    def loss(self, gold: Sequence[int], other: Sequence[int]) -> float:
        return parent_loss(gold, other)

    def most_violated(
        self, weights: Sequence[np.ndarray], inst: CompiledDependency
    ) -> tuple[list[int], float]:
        """Argmax of score(T) + parent_loss(gold, T), via +1 off-gold edges."""
        gold = inst.gold
        if gold is None:
            raise ValueError("instance has no gold heads")
        S = self.edge_scores(weights, inst)
        S += 1.0
        S[gold, np.arange(1, inst.n + 1)] -= 1.0
        return self._run_decoder(S)

    def decode(
        self, weights: Sequence[np.ndarray], inst: CompiledDependency
    ) -> tuple[list[int], float]:
        return self._run_decoder(self.edge_scores(weights, inst))
