"""Structure theory of the coding subshift.

Strongly connected components with periods and cyclic parts, word-maximal
components, realization of conjugacy classes by periodic orbits, lattice
versus non-arithmetic behavior of potentials over periodic orbits, and a
desk-scale growth-quasi-tightness coverage diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .automaton import IDENTITY_LABEL, GeodesicAutomaton
from .groups import ConjClass, Element, FreeGroup, Word, invert_word


class ShiftError(Exception):
    pass


@dataclass(frozen=True)
class Component:
    index: int
    vertices: frozenset
    trivial: bool  # no cycle through the component
    period: int  # 0 sentinel for trivial components
    cyclic_parts: tuple = ()

    def __contains__(self, v: int) -> bool:
        return v in self.vertices


@dataclass(frozen=True)
class PeriodicOrbit:
    vertices: tuple  # (x_0, ..., x_{l-1}), closing edge x_{l-1} -> x_0
    labels: tuple

    @property
    def length(self) -> int:
        return len(self.vertices)


def _component_edges(aut: GeodesicAutomaton, vertices: frozenset) -> list:
    out = []
    for u in vertices:
        for label, v in aut.transitions[u]:
            if v in vertices:
                out.append((u, v, label))
    return sorted(out)


def scc_decompose(aut: GeodesicAutomaton) -> list[Component]:
    """Tarjan strongly connected components, iterative; components are
    returned in a deterministic order (sorted by least vertex)."""
    n = aut.n_states
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = [0]
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            succs = aut.transitions[v]
            while pi < len(succs):
                w = succs[pi][1]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
            work.pop()
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])
    sccs.sort(key=min)
    out = []
    for i, members in enumerate(sccs):
        vs = frozenset(members)
        has_cycle = len(members) > 1 or any(
            v == members[0] for _, v in aut.transitions[members[0]]
        )
        if not has_cycle:
            out.append(Component(i, vs, trivial=True, period=0))
            continue
        p, parts = _period_and_parts(aut, vs)
        out.append(
            Component(i, vs, trivial=False, period=p, cyclic_parts=parts)
        )
    return out


def _period_and_parts(aut: GeodesicAutomaton, vertices: frozenset):
    root = min(vertices)
    level = {root: 0}
    frontier = [root]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for _, v in aut.transitions[u]:
                if v not in vertices:
                    continue
                if v in level:
                    g = math.gcd(g, level[u] + 1 - level[v])
                else:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    p = abs(g) if g else 1
    parts = tuple(
        frozenset(v for v, l in level.items() if l % p == j)
        for j in range(p)
    )
    return p, parts


def period(comp: Component) -> int:
    if comp.trivial:
        raise ShiftError("trivial component has no period")
    return comp.period


# -- growth ------------------------------------------------------------------

def _perron_log(mat: np.ndarray, tol: float = 1e-12) -> float:
    n = mat.shape[0]
    if n <= 600:
        eig = np.linalg.eigvals(mat)
        return math.log(max(float(np.max(np.abs(eig))), 1e-300))
    # shifted power iteration; the +I shift kills period oscillation
    shifted = mat + np.eye(n)
    v = np.ones(n) / n
    lam = 0.0
    for _ in range(10000):
        w = shifted @ v
        nl = float(np.linalg.norm(w))
        w /= nl
        if abs(nl - lam) < tol * max(1.0, abs(lam)):
            return math.log(nl - 1.0)
        lam, v = nl, w
    raise ShiftError("power iteration did not converge")


def component_growth(
    aut: GeodesicAutomaton,
    comp: Component,
    potential=None,
    s: float = 0.0,
) -> float:
    """Log spectral radius of the component's 0-1 matrix; with a potential,
    the pressure of -s * potential over the component."""
    if comp.trivial:
        raise ShiftError("trivial component has no growth")
    if potential is not None:
        from .thermo import pressure

        return pressure(aut, comp, potential, s)
    verts = sorted(comp.vertices)
    pos = {v: i for i, v in enumerate(verts)}
    mat = np.zeros((len(verts), len(verts)))
    for u, v, label in _component_edges(aut, comp.vertices):
        if label != IDENTITY_LABEL:
            mat[pos[u], pos[v]] += 1.0
    return _perron_log(mat)


def word_maximal_components(
    aut: GeodesicAutomaton, tol: float = 1e-9
) -> list[Component]:
    comps = [c for c in scc_decompose(aut) if not c.trivial]
    comps = [
        c
        for c in comps
        if any(
            label != IDENTITY_LABEL
            for u, v, label in _component_edges(aut, c.vertices)
        )
    ]
    if not comps:
        raise ShiftError("no nontrivial components")
    growths = [component_growth(aut, c) for c in comps]
    top = max(growths)
    return [c for c, g in zip(comps, growths) if g >= top - tol]


def reachable_between(
    aut: GeodesicAutomaton, a: Component, b: Component
) -> bool:
    """Is any vertex of b reachable from a (outside of a itself)?"""
    seen = set(a.vertices)
    frontier = list(a.vertices)
    while frontier:
        u = frontier.pop()
        for _, v in aut.transitions[u]:
            if v in b.vertices:
                return True
            if v not in seen:
                seen.add(v)
                frontier.append(v)
    return False


@dataclass
class MaximalCrossCheck:
    ok: bool
    word_maximal: list[int]
    potential_maximal: list[int]
    disjoint: bool
    pressures: dict


def cross_check_maximal(
    aut: GeodesicAutomaton,
    potential,
    v_d: float,
    tol: float = 2e-6,
) -> MaximalCrossCheck:
    """The components maximizing plain word growth must coincide with those
    maximizing the pressure of -v_d * potential (whose maximum is 0), and
    distinct maximal components must not reach one another."""
    from .thermo import pressure

    comps = [c for c in scc_decompose(aut) if not c.trivial]
    comps = [
        c
        for c in comps
        if any(
            lab != IDENTITY_LABEL
            for _, _, lab in _component_edges(aut, c.vertices)
        )
    ]
    growths = {c.index: component_growth(aut, c) for c in comps}
    top_g = max(growths.values())
    wmax = sorted(c.index for c in comps if growths[c.index] >= top_g - 1e-9)
    pressures = {
        c.index: pressure(aut, c, potential, v_d) for c in comps
    }
    top_p = max(pressures.values())
    pmax = sorted(
        c.index for c in comps if pressures[c.index] >= top_p - tol
    )
    by_index = {c.index: c for c in comps}
    disjoint = True
    for i in wmax:
        for j in wmax:
            if i != j and reachable_between(aut, by_index[i], by_index[j]):
                disjoint = False
    return MaximalCrossCheck(
        ok=(wmax == pmax) and disjoint,
        word_maximal=wmax,
        potential_maximal=pmax,
        disjoint=disjoint,
        pressures=pressures,
    )


# -- loops realizing conjugacy classes ---------------------------------------

@dataclass(frozen=True)
class LoopWitness:
    orbit: PeriodicOrbit
    N: int
    sign: int

    @property
    def length(self) -> int:
        return self.orbit.length


def loops_realizing_class(
    aut: GeodesicAutomaton,
    comp: Component,
    c: ConjClass,
    N_max: int = 4,
    l_max: int = 32,
) -> Optional[LoopWitness]:
    """Find a periodic orbit in the component whose evaluation is conjugate
    to a power g^{+-N}, N <= N_max, orbit length <= l_max.  Searches in
    increasing N, positive sign first; returns the first witness.  A miss
    only means the bounded search failed, not that no loop exists."""
    group = aut.group
    if c.representative.length == 0 or c.is_torsion:
        raise ShiftError("torsion class has no realizing loop")
    target = group.canonical_class(c.representative).representative.word
    for N in range(1, N_max + 1):
        for sign in (1, -1):
            base = c.representative.word if sign == 1 else invert_word(
                c.representative.word
            )
            powered = group.normal_form(base * N)
            if isinstance(group, FreeGroup):
                powered = FreeGroup.cyclic_reduce(powered)
            if not powered or len(powered) > l_max:
                continue
            w = _find_label_cycle(aut, comp, powered)
            if w is not None:
                orbit_el = group.canonical_class(
                    group.element(w.labels)
                ).representative.word
                want = group.canonical_class(
                    group.element(powered)
                ).representative.word
                if orbit_el == want:
                    return LoopWitness(w, N, sign)
    return None


def _find_label_cycle(
    aut: GeodesicAutomaton, comp: Component, word: Word
) -> Optional[PeriodicOrbit]:
    """A closed path in the component spelling some cyclic rotation of the
    word; rotations tried in order, start vertices in sorted order."""
    n = len(word)
    for r in range(n):
        rot = word[r:] + word[:r]
        for start in sorted(comp.vertices):
            v = start
            vertices = []
            ok = True
            for s in rot:
                vertices.append(v)
                nxt = aut.step(v, s)
                if nxt is None or nxt not in comp.vertices:
                    ok = False
                    break
                v = nxt
            if ok and v == start:
                return PeriodicOrbit(tuple(vertices), rot)
    return None


def enumerate_cycles(
    aut: GeodesicAutomaton,
    comp: Component,
    l_max: int,
    max_cycles: int = 20000,
) -> list[PeriodicOrbit]:
    """Closed label-paths of length <= l_max inside the component.  Each
    cycle is anchored at its least vertex, so rotations are not repeated
    (cycles revisiting the anchor do appear once per anchored phase)."""
    out: list[PeriodicOrbit] = []
    verts = sorted(comp.vertices)
    for anchor in verts:
        stack = [(anchor, (), ())]
        while stack:
            v, vs, labels = stack.pop()
            for label, w in sorted(aut.transitions[v]):
                if label == IDENTITY_LABEL or w not in comp.vertices:
                    continue
                if w < anchor:
                    continue
                if w == anchor:
                    out.append(PeriodicOrbit(vs + (v,), labels + (label,)))
                    if len(out) >= max_cycles:
                        return out
                if len(vs) + 1 < l_max:
                    stack.append((w, vs + (v,), labels + (label,)))
    return out


# -- arithmeticity ------------------------------------------------------------

def _real_gcd(a: float, b: float, tol: float) -> float:
    a, b = abs(a), abs(b)
    if a < b:
        a, b = b, a
    while b > tol:
        r = math.fmod(a, b)
        r = min(r, abs(b - r))  # fold values just under a multiple
        a, b = b, r
    return a


@dataclass
class ArithmeticityReport:
    verdict: str  # "lattice" | "non_arithmetic" | "inconclusive"
    gap: float  # estimated lattice gap (residual scale when non-arithmetic)
    max_residual: float
    n_orbits: int
    sample_values: list = field(default_factory=list)


def arithmeticity(
    aut: GeodesicAutomaton,
    comp: Component,
    potential,
    l_max: int = 6,
    tol: float = 1e-8,
    gap_threshold: float = 1e-4,
    max_cycles: int = 20000,
) -> ArithmeticityReport:
    """Do the Birkhoff sums of the potential over periodic orbits lie in
    a common lattice a*Z?  The gap estimate is an iterated real gcd of the
    orbit sums with tolerance; verdicts carry explicit thresholds."""
    cycles = enumerate_cycles(aut, comp, l_max, max_cycles)
    values = sorted(
        {round(potential.cycle_sum(o.labels), 14) for o in cycles}
    )
    values = [v for v in values if abs(v) > tol]
    if len(values) < 2:
        return ArithmeticityReport("inconclusive", 0.0, 0.0, len(cycles))
    g = values[0]
    for v in values[1:]:
        g = _real_gcd(g, v, tol)
        if g <= tol:
            break
    sample = values[:12]
    if g > gap_threshold:
        resid = max(
            abs(v - g * round(v / g)) for v in values
        )
        if resid <= max(100 * tol, 1e-12 * max(values)):
            return ArithmeticityReport(
                "lattice", g, resid, len(cycles), sample
            )
    # no usable gap: the orbit sums generate a dense subgroup at this scale
    return ArithmeticityReport(
        "non_arithmetic", g, g, len(cycles), sample
    )


@dataclass
class ApproximabilityReport:
    ratio: float
    partial_quotients: list
    bounded_up_to_depth: bool
    rational: bool


def badly_approximable_diagnostic(
    l1: float, l2: float, depth: int = 20, quotient_bound: int = 50
) -> ApproximabilityReport:
    """Continued fraction of l1/l2; bounded partial quotients are heuristic
    evidence of a badly approximable ratio (no verdict asserted)."""
    if l1 <= 0 or l2 <= 0:
        raise ShiftError("lengths must be positive")
    x = l1 / l2
    quotients = []
    y = x
    rational = False
    for _ in range(depth):
        a = math.floor(y)
        quotients.append(int(a))
        frac = y - a
        if frac < 1e-12:
            rational = True
            break
        y = 1.0 / frac
    bounded = all(q <= quotient_bound for q in quotients[1:]) and not rational
    return ApproximabilityReport(x, quotients, bounded, rational)


# -- growth quasi-tightness ---------------------------------------------------

@dataclass
class CoverReport:
    r: int
    n: int
    covered: int
    sphere_size: int

    @property
    def covered_fraction(self) -> float:
        return self.covered / self.sphere_size


def gqt_cover_check(
    aut: GeodesicAutomaton,
    comp: Component,
    r: int,
    n: int,
    path_cap: int = 2_000_000,
) -> CoverReport:
    """Fraction of the word sphere S_n expressible as f1 * g * f2 with
    f1, f2 in B(r) and g read off a path inside the component."""
    group = aut.group
    sphere = group.sphere_set(n)
    # elements of paths inside the component, any start vertex, length <= n+2r
    loop_elements: set = set()
    budget = n + 2 * r
    seen: set = set()
    stack = [(start, ()) for start in sorted(comp.vertices)]
    seen.update(stack)
    while stack:
        v, nf = stack.pop()
        loop_elements.add(nf)
        if len(seen) > path_cap:
            raise ShiftError("path enumeration exceeded cap")
        if len(nf) >= budget:
            continue
        for label, w in aut.transitions[v]:
            if label != IDENTITY_LABEL and w in comp.vertices:
                nxt = (w, group.extend(nf, label))
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    ball = group.ball_words(r)
    covered = set()
    for f1 in ball:
        inv_f1 = invert_word(f1)
        for f2 in ball:
            for g in loop_elements:
                x = group.normal_form(f1 + g + f2)
                if x in sphere:
                    covered.add(x)
    return CoverReport(r, n, len(covered), len(sphere))
