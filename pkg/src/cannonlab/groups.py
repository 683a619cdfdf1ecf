"""Group presentations with a decidable word problem.

Supported families: free groups, C'(1/6) small cancellation groups
(Dehn's algorithm) and Schottky matrix groups (free, with a matrix
representation attached for geometric metrics).

Words are tuples of nonzero ints: generator i is ``+i`` (1-based), its
inverse ``-i``.  Shortlex order interleaves inverses: a < a^-1 < b < b^-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

Word = tuple  # tuple[int, ...]

DEFAULT_SPHERE_CAP = 20_000_000
DEFAULT_CLOSURE_CAP = 4096


class GroupError(Exception):
    pass


class SymbolError(GroupError):
    """A symbol outside the presentation's alphabet."""


class ResourceCapError(GroupError):
    """An enumeration would exceed its configured cap."""


class PresentationError(GroupError):
    """The presentation violates a family invariant (e.g. C'(1/6))."""


def free_reduce(word: Sequence[int]) -> Word:
    out: list[int] = []
    for s in word:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-s for s in reversed(word))


def _lcp(a: Sequence[int], b: Sequence[int]) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


@dataclass(frozen=True)
class Element:
    """A group element in canonical normal form."""

    group: "GroupPresentation" = field(repr=False)
    word: Word

    @property
    def length(self) -> int:
        return len(self.word)

    def __mul__(self, other: "Element") -> "Element":
        if self.group is not other.group:
            raise GroupError("elements belong to different presentations")
        return self.group.element(self.word + other.word)

    def inverse(self) -> "Element":
        return self.group.element(invert_word(self.word))

    def __pow__(self, n: int) -> "Element":
        if n < 0:
            return self.inverse() ** (-n)
        result = self.group.identity()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __str__(self) -> str:
        return self.group.word_to_str(self.word)


@dataclass(frozen=True)
class ConjClass:
    """A conjugacy class keyed by a canonical representative.

    ``resolved`` is False when the representative came from a bounded
    search below the documented safe radius; such classes compare equal
    only optimistically and callers are expected to check the flag.
    """

    representative: Element
    is_torsion: bool
    resolved: bool = True
    search_radius: int = 0

    @property
    def length(self) -> int:
        return self.representative.length


class GroupPresentation:
    """Base class; concrete families implement ``_canonical``."""

    family = "abstract"

    def __init__(self, generator_names: Sequence[str]):
        if len(set(generator_names)) != len(generator_names):
            raise PresentationError("duplicate generator names")
        self.generator_names = tuple(generator_names)
        self.rank = len(generator_names)
        # shortlex alphabet order: a, a^-1, b, b^-1, ...
        self.alphabet: Word = tuple(
            s for i in range(1, self.rank + 1) for s in (i, -i)
        )
        self._order = {s: j for j, s in enumerate(self.alphabet)}
        self._nf_cache: dict[Word, Word] = {}
        self._ext_cache: dict[tuple[Word, int], Word] = {}
        self._spheres: list[list[Word]] = [[()]]
        self._sphere_sets: list[frozenset] = [frozenset([()])]

    # -- orders and parsing ------------------------------------------------

    def shortlex_key(self, word: Word):
        order = self._order
        return (len(word), tuple(order[s] for s in word))

    def check_symbols(self, word: Sequence[int]) -> None:
        for s in word:
            if s not in self._order:
                raise SymbolError(f"symbol {s!r} outside alphabet")

    def parse_word(self, text: str) -> Word:
        """Parse 'abA' or 'a b a^-1' style words (uppercase = inverse)."""
        tokens: list[str] = []
        for chunk in text.replace(",", " ").split():
            if chunk.endswith("^-1"):
                tokens.append(chunk[:-3].upper())
            else:
                tokens.extend(chunk)
        word = []
        lower = {n: i + 1 for i, n in enumerate(self.generator_names)}
        for t in tokens:
            if t.lower() not in lower:
                raise SymbolError(f"unknown generator {t!r}")
            s = lower[t.lower()]
            word.append(-s if t.isupper() else s)
        return tuple(word)

    def word_to_str(self, word: Word) -> str:
        if not word:
            return "e"
        parts = []
        for s in word:
            name = self.generator_names[abs(s) - 1]
            parts.append(name.upper() if s < 0 else name)
        return "".join(parts)

    # -- normal forms ------------------------------------------------------

    def _canonical(self, word: Word) -> Word:
        raise NotImplementedError

    def normal_form(self, word: Sequence[int]) -> Word:
        word = tuple(word)
        cached = self._nf_cache.get(word)
        if cached is None:
            cached = self._canonical(word)
            self._nf_cache[word] = cached
        return cached

    def element(self, word: Sequence[int]) -> Element:
        self.check_symbols(word)
        return Element(self, self.normal_form(word))

    def identity(self) -> Element:
        return Element(self, ())

    def extend(self, word: Word, s: int) -> Word:
        """Normal form of ``word * s`` (cached; hot path for enumeration)."""
        key = (word, s)
        nf = self._ext_cache.get(key)
        if nf is None:
            nf = self.normal_form(word + (s,))
            self._ext_cache[key] = nf
        return nf

    # -- enumeration -------------------------------------------------------

    def _grow_spheres(self, n: int, cap: int) -> None:
        while len(self._spheres) <= n:
            prev = self._spheres[-1]
            level = len(self._spheres)
            known = set().union(*self._sphere_sets[-2:])
            nxt = set()
            for w in prev:
                for s in self.alphabet:
                    nf = self.extend(w, s)
                    if len(nf) != level or nf in known:
                        if len(nf) > level:
                            raise GroupError(
                                "normal form longer than BFS level; "
                                "presentation machinery inconsistent"
                            )
                        continue
                    nxt.add(nf)
                if len(nxt) > cap:
                    raise ResourceCapError(
                        f"sphere {level} exceeds cap {cap}"
                    )
            ordered = sorted(nxt, key=self.shortlex_key)
            self._spheres.append(ordered)
            self._sphere_sets.append(frozenset(nxt))

    def sphere_words(self, n: int, cap: int = DEFAULT_SPHERE_CAP) -> list[Word]:
        if n < 0:
            raise GroupError("radius must be nonnegative")
        self._grow_spheres(n, cap)
        return self._spheres[n]

    def ball_words(self, n: int, cap: int = DEFAULT_SPHERE_CAP) -> list[Word]:
        self._grow_spheres(n, cap)
        out: list[Word] = []
        for k in range(n + 1):
            out.extend(self._spheres[k])
        return out

    def sphere_set(self, n: int, cap: int = DEFAULT_SPHERE_CAP) -> frozenset:
        self._grow_spheres(n, cap)
        return self._sphere_sets[n]

    # -- conjugacy ---------------------------------------------------------

    def canonical_class(self, g: Element, search_radius: int = 0) -> ConjClass:
        raise NotImplementedError

    def enumerate_classes(
        self, n_max: int, search_radius: int = 0, cap: int = DEFAULT_SPHERE_CAP
    ) -> list[ConjClass]:
        seen: dict[Word, ConjClass] = {}
        for w in self.ball_words(n_max, cap):
            c = self.canonical_class(Element(self, w), search_radius)
            seen.setdefault(c.representative.word, c)
        return sorted(seen.values(), key=lambda c: self.shortlex_key(c.representative.word))


class FreeGroup(GroupPresentation):
    family = "free"

    def __init__(self, rank: int, generator_names: Optional[Sequence[str]] = None):
        if rank < 2:
            raise PresentationError("free rank must be >= 2 (non-elementary)")
        if generator_names is None:
            generator_names = [chr(ord("a") + i) for i in range(rank)]
        if len(generator_names) != rank:
            raise PresentationError("generator_names must match rank")
        super().__init__(generator_names)

    def _canonical(self, word: Word) -> Word:
        return free_reduce(word)

    @staticmethod
    def cyclic_reduce(word: Word) -> Word:
        word = free_reduce(word)
        while len(word) >= 2 and word[0] == -word[-1]:
            word = word[1:-1]
        return word

    def canonical_class(self, g: Element, search_radius: int = 0) -> ConjClass:
        w = self.cyclic_reduce(g.word)
        if not w:
            return ConjClass(self.identity(), is_torsion=True)
        rotations = [w[i:] + w[:i] for i in range(len(w))]
        rep = min(rotations, key=self.shortlex_key)
        return ConjClass(Element(self, rep), is_torsion=False)


class SmallCancellationGroup(GroupPresentation):
    """C'(1/6) presentation solved by Dehn's algorithm.

    Normal form: Dehn-shorten until no subword covers more than half of
    a symmetrized relator, then take the shortlex-least word in the
    closure under exact-half relator exchanges.
    """

    family = "small_cancellation"

    def __init__(
        self,
        generator_names: Sequence[str],
        relators: Sequence[str],
        closure_cap: int = DEFAULT_CLOSURE_CAP,
    ):
        super().__init__(generator_names)
        self.closure_cap = closure_cap
        self.relator_words: list[Word] = []
        rotations: set[Word] = set()
        for text in relators:
            r = FreeGroup.cyclic_reduce(self.parse_word(text))
            if not r:
                raise PresentationError("trivial relator")
            self.relator_words.append(r)
            for base in (r, invert_word(r)):
                for i in range(len(base)):
                    rotations.add(base[i:] + base[:i])
        self._rotations = sorted(rotations, key=self.shortlex_key)
        self.max_relator_len = max(len(r) for r in self.relator_words)
        self._check_sixth()
        # gram prefilters, grouped by relator length
        self._gt_grams: dict[int, set] = {}
        self._eq_grams: dict[int, set] = {}
        for r in self._rotations:
            L = len(r)
            m = L // 2 + 1  # shortest "more than half" match
            self._gt_grams.setdefault(m, set()).add(r[:m])
            if L % 2 == 0:
                self._eq_grams.setdefault(L // 2, set()).add(r[: L // 2])

    def _check_sixth(self) -> None:
        for i, r1 in enumerate(self._rotations):
            for r2 in self._rotations[i + 1 :]:
                piece = _lcp(r1, r2)
                bound = min(len(r1), len(r2)) / 6.0
                if piece >= bound:
                    raise PresentationError(
                        f"C'(1/6) fails: piece of length {piece} in relator "
                        f"of length {min(len(r1), len(r2))}"
                    )

    # -- Dehn machinery ----------------------------------------------------

    def _has_gram(self, word: Word, grams: dict[int, set]) -> bool:
        for m, gset in grams.items():
            if len(word) < m:
                continue
            for i in range(len(word) - m + 1):
                if word[i : i + m] in gset:
                    return True
        return False

    def _find_long_match(self, word: Word):
        """Leftmost-longest subword covering more than half a relator."""
        best = None
        for i in range(len(word)):
            for r in self._rotations:
                L = len(r)
                m = _lcp(word[i:], r)
                if 2 * m > L and (best is None or m > best[2]):
                    best = (i, r, m)
            if best is not None and best[0] == i:
                # leftmost position wins; keep the longest match there
                pass
        return best

    def _dehn_shorten(self, word: Word) -> Word:
        word = free_reduce(word)
        while self._has_gram(word, self._gt_grams):
            best = self._find_long_match(word)
            if best is None:
                break
            i, r, m = best
            word = free_reduce(
                word[:i] + invert_word(r[m:]) + word[i + m :]
            )
        return word

    def _half_variants(self, word: Word) -> Iterable[Word]:
        for half, gset in self._eq_grams.items():
            if len(word) < half:
                continue
            for i in range(len(word) - half + 1):
                seg = word[i : i + half]
                if seg not in gset:
                    continue
                for r in self._rotations:
                    if len(r) == 2 * half and r[:half] == seg:
                        yield free_reduce(
                            word[:i] + invert_word(r[half:]) + word[i + half :]
                        )

    def _canonical(self, word: Word) -> Word:
        w = free_reduce(word)
        while True:
            w = self._dehn_shorten(w)
            # closure under equal-length half-relator exchanges
            seen = {w}
            queue = [w]
            shorter = None
            while queue:
                cur = queue.pop()
                for v in self._half_variants(cur):
                    if len(v) < len(cur):
                        shorter = v
                        queue = []
                        break
                    if v in seen:
                        continue
                    if self._has_gram(v, self._gt_grams):
                        shorter = self._dehn_shorten(v)
                        queue = []
                        break
                    seen.add(v)
                    queue.append(v)
                if len(seen) > self.closure_cap:
                    raise ResourceCapError("normal-form closure exceeded cap")
            if shorter is not None:
                w = shorter
                continue
            return min(seen, key=self.shortlex_key)

    def geodesic_representatives(self, word: Word) -> frozenset:
        """All geodesic words of the element (closure of the normal form)."""
        w = self.normal_form(word)
        seen = {w}
        queue = [w]
        while queue:
            cur = queue.pop()
            for v in self._half_variants(cur):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return frozenset(seen)

    # -- conjugacy ---------------------------------------------------------

    def _cyclic_dehn_reduce(self, word: Word) -> Word:
        w = self.normal_form(word)
        while True:
            candidates = [
                self.normal_form(w[i:] + w[:i]) for i in range(max(len(w), 1))
            ]
            best = min(candidates, key=self.shortlex_key)
            best = self.normal_form(FreeGroup.cyclic_reduce(best))
            if len(best) < len(w):
                w = best
                continue
            return best

    def safe_conjugacy_radius(self) -> int:
        return 2 * self.max_relator_len

    def canonical_class(self, g: Element, search_radius: int = 0) -> ConjClass:
        w = self._cyclic_dehn_reduce(g.word)
        if not w:
            return ConjClass(self.identity(), is_torsion=True,
                             search_radius=search_radius)
        best = w
        for h in self.ball_words(search_radius):
            cand = self._cyclic_dehn_reduce(
                invert_word(h) + w + h
            )
            if self.shortlex_key(cand) < self.shortlex_key(best):
                best = cand
        resolved = search_radius >= self.safe_conjugacy_radius()
        return ConjClass(
            Element(self, best),
            is_torsion=False,
            resolved=resolved,
            search_radius=search_radius,
        )


def surface_group(genus: int = 2) -> SmallCancellationGroup:
    """Fundamental group of a closed orientable surface, standard presentation."""
    if genus < 2:
        raise PresentationError("genus must be >= 2 (non-elementary)")
    names = []
    for i in range(genus):
        names.extend([f"a{i}" if genus > 2 else "ab"[0], ""])
    # keep single-letter names for genus 2, else a1,b1,a2,b2,...
    if genus == 2:
        names = ["a", "b", "c", "d"]
        relator = "a b A B c d C D"
    else:
        names = [f"{x}{i+1}" for i in range(genus) for x in "ab"]
        relator = " ".join(
            f"a{i+1} b{i+1} a{i+1}^-1 b{i+1}^-1" for i in range(genus)
        )
    return SmallCancellationGroup(names, [relator])


class SchottkyGroup(FreeGroup):
    """Free group of loxodromic Mobius maps in ping-pong (Schottky) position.

    Validation: every generator has |trace| > 2 and the isometric circles
    of the generators and their inverses are pairwise disjoint.
    """

    family = "matrix"

    def __init__(
        self,
        matrices: Sequence[np.ndarray],
        generator_names: Optional[Sequence[str]] = None,
    ):
        mats = [np.asarray(m, dtype=float) for m in matrices]
        super().__init__(len(mats), generator_names)
        for m in mats:
            det = float(np.linalg.det(m))
            if det <= 0:
                raise PresentationError("generator matrix must have det > 0")
            m /= math.sqrt(det)
            if abs(np.trace(m)) <= 2.0 + 1e-12:
                raise PresentationError("generator is not loxodromic (|tr| <= 2)")
        self.matrices = mats
        self._check_schottky()
        self._matrix_cache: dict[Word, np.ndarray] = {(): np.eye(2)}

    def _isometric_circles(self):
        circles = []
        for m in self.matrices:
            for mat in (m, np.linalg.inv(m)):
                c, d = mat[1, 0], mat[1, 1]
                if abs(c) < 1e-12:
                    raise PresentationError(
                        "generator fixes infinity; choose a conjugated model"
                    )
                circles.append((-d / c, 1.0 / abs(c)))
        return circles

    def _check_schottky(self) -> None:
        circles = self._isometric_circles()
        for i in range(len(circles)):
            for j in range(i + 1, len(circles)):
                (c1, r1), (c2, r2) = circles[i], circles[j]
                if abs(c1 - c2) <= r1 + r2:
                    raise PresentationError(
                        "isometric circles overlap; not a Schottky configuration"
                    )

    def matrix_of(self, word: Word) -> np.ndarray:
        cached = self._matrix_cache.get(word)
        if cached is not None:
            return cached
        s = word[0]
        gen = self.matrices[abs(s) - 1]
        if s < 0:
            gen = np.linalg.inv(gen)
        mat = gen @ self.matrix_of(word[1:])
        if len(word) <= 24:
            self._matrix_cache[word] = mat
        return mat


def hyperbolic_isometry(axis: tuple[float, float], trace: float) -> np.ndarray:
    """SL(2,R) matrix with given trace > 2 translating along the geodesic
    with real endpoints ``axis``."""
    p, q = axis
    if abs(trace) <= 2:
        raise PresentationError("trace must exceed 2")
    lam = (trace + math.sqrt(trace * trace - 4.0)) / 2.0
    v = np.array([[p, q], [1.0, 1.0]])
    m = v @ np.diag([lam, 1.0 / lam]) @ np.linalg.inv(v)
    return m / math.sqrt(np.linalg.det(m))


def standard_schottky(traces: Sequence[float] = (3.0, 5.0)) -> SchottkyGroup:
    """Two-generator Schottky group used across the examples and tests."""
    axes = [(-1.0, 1.0), (4.0, 8.0), (-6.0, -3.0), (12.0, 20.0)]
    mats = [
        hyperbolic_isometry(axes[i], t) for i, t in enumerate(traces)
    ]
    return SchottkyGroup(mats)


# -- module-level operation wrappers (spec surface) -------------------------

def reduce(presentation: GroupPresentation, raw_word: Sequence[int]) -> Element:
    return presentation.element(raw_word)


def multiply(a: Element, b: Element) -> Element:
    return a * b


def enumerate_sphere(
    presentation: GroupPresentation, n: int, cap: int = DEFAULT_SPHERE_CAP
) -> frozenset:
    return frozenset(
        Element(presentation, w) for w in presentation.sphere_words(n, cap)
    )


def canonical_class(g: Element, search_radius: int = 0) -> ConjClass:
    return g.group.canonical_class(g, search_radius)


def enumerate_classes(
    presentation: GroupPresentation, n_max: int, search_radius: int = 0
) -> list[ConjClass]:
    return presentation.enumerate_classes(n_max, search_radius)
