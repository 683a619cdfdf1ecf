"""Geodesic automata for the supported groups.

States are empirical cone signatures: the profile of length increments
d(o, gh) - d(o, g) over a ball of test elements h, optionally refined by
shortlex falsification data (which h of equal length give a smaller
normal form).  Construction explores one representative element per
state; correctness is enforced operationally by validate_bijection
against brute-force enumeration, not by theory.

Paths from the initial state spell geodesic words; with the shortlex
refinement, exactly one accepted word per group element.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .groups import Element, GroupPresentation, ResourceCapError, Word

IDENTITY_LABEL = 0


class AutomatonError(Exception):
    pass


class UnsaturatedError(AutomatonError):
    """Construction did not stabilize at the given cone radius."""

    def __init__(self, message: str, radius: int):
        super().__init__(message)
        self.radius = radius


@dataclass(frozen=True)
class GeodesicAutomaton:
    group: GroupPresentation = field(repr=False, compare=False)
    n_states: int
    initial: int
    transitions: tuple  # tuple over states of tuple[(label, target), ...]
    accepts_all_geodesics: bool
    shortlex_unique: bool
    r_cone: int
    state_reps: tuple = field(repr=False)  # witness word per state
    augmented: bool = False
    zero_state: Optional[int] = None

    # -- basic structure ---------------------------------------------------

    def edges(self) -> list[tuple[int, int, int]]:
        """Sorted (from, to, label) list."""
        out = []
        for u, row in enumerate(self.transitions):
            for label, v in row:
                out.append((u, v, label))
        return sorted(out)

    def successors(self, state: int) -> tuple:
        return self.transitions[state]

    def step(self, state: int, label: int) -> Optional[int]:
        for lab, v in self.transitions[state]:
            if lab == label:
                return v
        return None

    def adjacency(self, include_zero: bool = False) -> np.ndarray:
        a = np.zeros((self.n_states, self.n_states))
        for u, v, label in self.edges():
            if label == IDENTITY_LABEL and not include_zero:
                continue
            a[u, v] += 1.0
        return a

    # -- language ----------------------------------------------------------

    def accepted_counts(self, n_max: int) -> list[int]:
        """Number of accepted words of each length 0..n_max (0-edges excluded)."""
        vec = np.zeros(self.n_states, dtype=object)
        vec[self.initial] = 1
        counts = [1]
        for _ in range(n_max):
            nxt = np.zeros(self.n_states, dtype=object)
            for u, row in enumerate(self.transitions):
                if not vec[u]:
                    continue
                for label, v in row:
                    if label != IDENTITY_LABEL:
                        nxt[v] += vec[u]
            vec = nxt
            counts.append(int(vec.sum()))
        return counts

    def accepted_words(self, n_max: int) -> Iterator[tuple[Word, int]]:
        """Yield (word, end_state) for every accepted word of length <= n_max."""
        stack = [((), self.initial)]
        while stack:
            word, state = stack.pop()
            yield word, state
            if len(word) == n_max:
                continue
            for label, v in self.transitions[state]:
                if label != IDENTITY_LABEL:
                    stack.append((word + (label,), v))

    def ev(self, labels: Sequence[int]) -> Element:
        """Evaluate a label path to its group element (0-labels act as identity)."""
        return self.group.element(tuple(s for s in labels if s != IDENTITY_LABEL))

    def path_labels(self, vertices: Sequence[int]) -> Word:
        """Resolve a vertex sequence to its label word; error if any step is
        not an edge or carries more than one label."""
        labels = []
        for u, v in zip(vertices, vertices[1:]):
            found = [lab for lab, t in self.transitions[u] if t == v]
            if not found:
                raise AutomatonError(f"no edge {u} -> {v}")
            if len(found) > 1:
                raise AutomatonError(f"ambiguous edge {u} -> {v}: labels {found}")
            labels.append(found[0])
        return tuple(labels)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema": "geodesic-automaton/1",
            "family": self.group.family,
            "generators": list(self.group.generator_names),
            "n_states": self.n_states,
            "initial": self.initial,
            "flags": {
                "accepts_all_geodesics": self.accepts_all_geodesics,
                "shortlex_unique": self.shortlex_unique,
                "augmented": self.augmented,
            },
            "r_cone": self.r_cone,
            "zero_state": self.zero_state,
            "edges": [list(e) for e in self.edges()],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str, group: GroupPresentation) -> "GeodesicAutomaton":
        doc = json.loads(text)
        if doc.get("schema") != "geodesic-automaton/1":
            raise AutomatonError("unknown automaton schema")
        n = doc["n_states"]
        rows: list[list] = [[] for _ in range(n)]
        for u, v, label in doc["edges"]:
            rows[u].append((label, v))
        return GeodesicAutomaton(
            group=group,
            n_states=n,
            initial=doc["initial"],
            transitions=tuple(tuple(sorted(r)) for r in rows),
            accepts_all_geodesics=doc["flags"]["accepts_all_geodesics"],
            shortlex_unique=doc["flags"]["shortlex_unique"],
            r_cone=doc["r_cone"],
            state_reps=tuple(() for _ in range(n)),
            augmented=doc["flags"]["augmented"],
            zero_state=doc["zero_state"],
        )

    def drop_edge(self, u: int, v: int, label: int) -> "GeodesicAutomaton":
        """Copy with one edge removed (fault-injection helper for tests)."""
        rows = [list(r) for r in self.transitions]
        if (label, v) not in rows[u]:
            raise AutomatonError("edge not present")
        rows[u].remove((label, v))
        return replace(self, transitions=tuple(tuple(r) for r in rows))


# -- construction ------------------------------------------------------------

def _signature(
    group: GroupPresentation,
    ball: list[Word],
    g: Word,
    shortlex: bool,
):
    """Cone signature of the element g: increment profile over the test
    ball, plus (for shortlex automata) which equal-length translates have
    a smaller normal form."""
    n = len(g)
    nf_of: dict[Word, Word] = {(): g}
    diffs = []
    fals = []
    key_g = group.shortlex_key(g)
    for i, h in enumerate(ball):
        if h:
            parent = nf_of.get(h[:-1])
            if parent is None:
                nf = g
                for s in h:
                    nf = group.extend(nf, s)
            else:
                nf = group.extend(parent, h[-1])
            nf_of[h] = nf
        else:
            nf = g
        diffs.append(len(nf) - n)
        if shortlex and len(nf) == n and group.shortlex_key(nf) < key_g:
            fals.append(i)
    if shortlex:
        return (tuple(diffs), tuple(fals))
    return tuple(diffs)


def _minimize(
    rows: list[list], initial: int, reps: list[Word], group: GroupPresentation
) -> tuple[list[list], int, list[Word]]:
    """Moore partition refinement (all states accepting, missing edges go
    to an implicit dead state), followed by canonical BFS renumbering."""
    n = len(rows)
    block = [0] * n
    n_blocks = 1
    while True:
        sigs = [
            tuple(sorted((label, block[t]) for label, t in rows[u]))
            for u in range(n)
        ]
        assign: dict = {}
        new_block = []
        for u in range(n):
            key = (block[u], sigs[u])
            b = assign.get(key)
            if b is None:
                b = len(assign)
                assign[key] = b
            new_block.append(b)
        if len(assign) == n_blocks:
            break
        block = new_block
        n_blocks = len(assign)
    # representative per block: shortlex-least witness word
    members: dict[int, list[int]] = {}
    for u in range(n):
        members.setdefault(block[u], []).append(u)
    # canonical order: BFS from the initial block under sorted labels
    order: dict[int, int] = {block[initial]: 0}
    frontier = [block[initial]]
    block_rows: dict[int, list] = {}
    for b, us in members.items():
        merged = sorted({(label, block[t]) for label, t in rows[us[0]]})
        block_rows[b] = merged
    while frontier:
        nxt = []
        for b in frontier:
            for _, tb in sorted(block_rows[b]):
                if tb not in order:
                    order[tb] = len(order)
                    nxt.append(tb)
        frontier = nxt
    out_rows: list[list] = [[] for _ in range(len(order))]
    out_reps: list[Word] = [()] * len(order)
    for b, i in order.items():
        out_rows[i] = [(label, order[tb]) for label, tb in block_rows[b]]
        out_reps[i] = min(
            (reps[u] for u in members[b]), key=group.shortlex_key
        )
    return out_rows, 0, out_reps


def _build_by_signature(
    presentation: GroupPresentation,
    r_cone: int,
    shortlex: bool,
    state_cap: int,
) -> tuple[list[list], int, list[Word]]:
    ball = presentation.ball_words(r_cone)
    sig_to_state: dict = {}
    reps: list[Word] = []
    rows: list[list] = []
    queue: list[tuple[int, Word]] = []

    def state_of(word: Word) -> int:
        sig = _signature(presentation, ball, word, shortlex)
        st = sig_to_state.get(sig)
        if st is None:
            st = len(reps)
            sig_to_state[sig] = st
            reps.append(word)
            rows.append([])
            queue.append((st, word))
        return st

    initial = state_of(())
    head = 0
    while head < len(queue):
        st, g = queue[head]
        head += 1
        if len(reps) > state_cap:
            raise UnsaturatedError(
                f"state count exceeded cap {state_cap} at r_cone={r_cone}",
                r_cone,
            )
        for s in presentation.alphabet:
            nf = presentation.extend(g, s)
            if shortlex:
                accepted = nf == g + (s,)
            else:
                accepted = len(nf) == len(g) + 1
            if not accepted:
                continue
            rows[st].append((s, state_of(nf)))
    return rows, initial, reps


def _forbidden_grams(group, shortlex: bool) -> dict[int, set]:
    """Subwords that cannot occur in a (shortlex) geodesic word of a small
    cancellation group: any subword longer than half a symmetrized relator;
    with the shortlex flag, also any exact half whose complement is
    letterwise smaller."""
    by_len: dict[int, set] = {}
    order = group._order
    for r in group._rotations:
        L = len(r)
        m = L // 2 + 1
        by_len.setdefault(m, set()).add(r[:m])
        if shortlex and L % 2 == 0:
            half = L // 2
            seg = r[:half]
            comp = tuple(-s for s in reversed(r[half:]))
            if tuple(order[s] for s in comp) < tuple(order[s] for s in seg):
                by_len.setdefault(half, set()).add(seg)
    return by_len


def _build_by_window(
    group,
    r_cone: int,
    shortlex: bool,
    state_cap: int,
) -> tuple[list[list], int, list[Word]]:
    """Direct construction for small cancellation groups: states are
    suffix windows, acceptance rejects free cancellations and forbidden
    grams ending at the new letter."""
    grams = _forbidden_grams(group, shortlex)
    window = max(grams) - 1 + (r_cone - 1)
    state_of: dict[Word, int] = {(): 0}
    rows: list[list] = [[]]
    reps: list[Word] = [()]
    queue: list[tuple[int, Word, Word]] = [(0, (), ())]
    raw_cap = max(state_cap, 500_000)  # minimization shrinks this massively
    head = 0
    while head < len(queue):
        st, win, rep = queue[head]
        head += 1
        if len(rows) > raw_cap:
            raise UnsaturatedError(
                f"window count exceeded cap {raw_cap} at r_cone={r_cone}",
                r_cone,
            )
        for s in group.alphabet:
            if win and s == -win[-1]:
                continue
            u = win + (s,)
            if any(
                len(u) >= m and u[-m:] in gset for m, gset in grams.items()
            ):
                continue
            nw = u[-window:]
            t = state_of.get(nw)
            if t is None:
                t = len(rows)
                state_of[nw] = t
                rows.append([])
                reps.append(rep + (s,))
                queue.append((t, nw, rep + (s,)))
            rows[st].append((s, t))
    return rows, 0, reps


def _build(
    presentation: GroupPresentation,
    r_cone: int,
    shortlex: bool,
    state_cap: int,
) -> GeodesicAutomaton:
    if r_cone < 1:
        raise AutomatonError("r_cone must be >= 1")
    if presentation.family == "small_cancellation":
        rows, initial, reps = _build_by_window(
            presentation, r_cone, shortlex, state_cap
        )
    else:
        rows, initial, reps = _build_by_signature(
            presentation, r_cone, shortlex, state_cap
        )
    rows, initial, reps = _minimize(rows, initial, reps, presentation)
    if len(rows) > state_cap:
        raise ResourceCapError(
            f"minimized automaton has {len(rows)} states, cap {state_cap}"
        )
    return GeodesicAutomaton(
        group=presentation,
        n_states=len(rows),
        initial=initial,
        transitions=tuple(tuple(sorted(r)) for r in rows),
        accepts_all_geodesics=not shortlex,
        shortlex_unique=shortlex,
        r_cone=r_cone,
        state_reps=tuple(reps),
    )


def build_geodesic_acceptor(
    presentation: GroupPresentation, r_cone: int, state_cap: int = 20000
) -> GeodesicAutomaton:
    return _build(presentation, r_cone, shortlex=False, state_cap=state_cap)


def build_shortlex_acceptor(
    presentation: GroupPresentation, r_cone: int, state_cap: int = 20000
) -> GeodesicAutomaton:
    return _build(presentation, r_cone, shortlex=True, state_cap=state_cap)


def augment(aut: GeodesicAutomaton) -> GeodesicAutomaton:
    """Add the absorbing 0-state: identity-labeled edges from every vertex
    except the initial one, and a self-loop at 0."""
    if aut.augmented:
        warnings.warn("automaton already augmented; returning unchanged")
        return aut
    zero = aut.n_states
    rows = [list(r) for r in aut.transitions]
    for u in range(aut.n_states):
        if u != aut.initial:
            rows[u].append((IDENTITY_LABEL, zero))
    rows.append([(IDENTITY_LABEL, zero)])
    return replace(
        aut,
        n_states=aut.n_states + 1,
        transitions=tuple(tuple(sorted(r)) for r in rows),
        state_reps=aut.state_reps + ((),),
        augmented=True,
        zero_state=zero,
    )


# -- validation --------------------------------------------------------------

@dataclass
class BijectionReport:
    ok: bool
    n_max: int
    accepted_counts: list[int]
    sphere_sizes: list[int]
    first_failure: Optional[dict] = None


def validate_bijection(aut: GeodesicAutomaton, n_max: int) -> BijectionReport:
    """Check that accepted words biject with group elements up to length
    n_max: per-length counts match brute-force sphere sizes and evaluated
    elements are pairwise distinct."""
    group = aut.group
    counts = aut.accepted_counts(n_max)
    spheres = [len(group.sphere_words(n)) for n in range(n_max + 1)]
    for n, (c, s) in enumerate(zip(counts, spheres)):
        if c != s:
            return BijectionReport(
                False, n_max, counts, spheres,
                {"kind": "count_mismatch", "length": n,
                 "accepted": c, "expected": s},
            )
    if aut.shortlex_unique:
        seen: set = set()
        # DFS with incremental normal forms (one cached extension per edge)
        stack: list[tuple[Word, int, Word]] = [((), aut.initial, ())]
        while stack:
            word, state, nf = stack.pop()
            if len(word) < n_max:
                for label, v in aut.transitions[state]:
                    if label != IDENTITY_LABEL:
                        stack.append(
                            (word + (label,), v, group.extend(nf, label))
                        )
            if len(nf) != len(word):
                return BijectionReport(
                    False, n_max, counts, spheres,
                    {"kind": "non_geodesic_word",
                     "word": group.word_to_str(word)},
                )
            if nf in seen:
                return BijectionReport(
                    False, n_max, counts, spheres,
                    {"kind": "duplicate_element",
                     "word": group.word_to_str(word)},
                )
            seen.add(nf)
    return BijectionReport(True, n_max, counts, spheres)


def saturate(
    presentation: GroupPresentation,
    radii: Sequence[int] = (1, 2, 3, 4),
    n_validate: int = 6,
    shortlex: bool = True,
    state_cap: int = 20000,
) -> tuple[GeodesicAutomaton, dict]:
    """Sweep cone radii until the state count stabilizes between two
    consecutive radii and the bijection validates; returns the automaton
    at the smaller radius plus a sweep report."""
    build = build_shortlex_acceptor if shortlex else build_geodesic_acceptor
    history = []
    prev: Optional[GeodesicAutomaton] = None
    for r in radii:
        aut = build(presentation, r, state_cap)
        history.append({"r_cone": r, "n_states": aut.n_states})
        if prev is not None and prev.n_states == aut.n_states:
            report = validate_bijection(prev, n_validate)
            if report.ok:
                return prev, {"history": history, "validated_to": n_validate}
        prev = aut
    raise UnsaturatedError(
        f"no saturation in radii {list(radii)}; history {history}",
        radii[-1],
    )
