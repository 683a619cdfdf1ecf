"""Left-invariant metrics on the supported groups.

Every metric is evaluated through d(o, g) on normal-form words; distances
between arbitrary points come from left invariance, d(x, y) = d(o, x^-1 y).
Kinds: word metric, scaled word metric, Green metric of a symmetric random
walk (closed form on free groups for the uniform walk, numeric absorbing
solve otherwise), hyperbolic-plane orbit metric of a Schottky matrix model,
and linear combinations of the above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .groups import (
    ConjClass,
    Element,
    FreeGroup,
    GroupPresentation,
    SchottkyGroup,
    Word,
    free_reduce,
    invert_word,
)


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class WalkSpec:
    """Symmetric finitely supported step distribution on the generators."""

    probabilities: dict  # symbol -> positive real
    include_identity: float = 0.0

    def __post_init__(self):
        total = sum(self.probabilities.values()) + self.include_identity
        if abs(total - 1.0) > 1e-12:
            raise MetricError(f"step probabilities sum to {total}, not 1")
        for s, p in self.probabilities.items():
            if p <= 0:
                raise MetricError("step probabilities must be positive")
            if abs(self.probabilities.get(-s, -1.0) - p) > 1e-12:
                raise MetricError("walk must be symmetric: p(s) = p(s^-1)")

    @staticmethod
    def uniform(group: GroupPresentation) -> "WalkSpec":
        n = len(group.alphabet)
        return WalkSpec({s: 1.0 / n for s in group.alphabet})

    def is_uniform(self) -> bool:
        vals = list(self.probabilities.values())
        return self.include_identity == 0.0 and max(vals) - min(vals) < 1e-15


class MetricModel:
    """Base evaluator; caches d(o, g) keyed by normal form."""

    kind = "abstract"

    def __init__(self, group: GroupPresentation):
        self.group = group
        self._cache: dict[Word, float] = {(): 0.0}

    def _eval(self, word: Word) -> float:
        raise NotImplementedError

    def dist_word(self, word: Word) -> float:
        word = self.group.normal_form(word)
        v = self._cache.get(word)
        if v is None:
            v = self._eval(word)
            self._cache[word] = v
        return v

    def dist(self, g: Element) -> float:
        return self.dist_word(g.word)

    def dist_between(self, x: Element, y: Element) -> float:
        return self.dist_word(invert_word(x.word) + y.word)

    def dist_many(self, words: Sequence[Word]) -> np.ndarray:
        return np.array([self.dist_word(w) for w in words])


class WordMetric(MetricModel):
    kind = "word"

    def _eval(self, word: Word) -> float:
        return float(len(word))


class ScaledWordMetric(MetricModel):
    kind = "scaled_word"

    def __init__(self, group: GroupPresentation, factor: float):
        if factor <= 0:
            raise MetricError("scale factor must be positive")
        super().__init__(group)
        self.factor = float(factor)

    def _eval(self, word: Word) -> float:
        return self.factor * len(word)


class GreenClosedForm(MetricModel):
    """Green metric of the uniform nearest-neighbor walk on a free group.

    The hitting probability of a neighbor on the (2k)-regular tree is
    1/(2k-1), so G(o,x)/G(o,o) = (2k-1)^{-|x|} and d_G = |x| log(2k-1).
    """

    kind = "green_closed_form"

    def __init__(self, group: FreeGroup):
        if not isinstance(group, FreeGroup):
            raise MetricError("closed-form Green metric needs a free group")
        super().__init__(group)
        self.log_base = math.log(2 * group.rank - 1)

    def _eval(self, word: Word) -> float:
        return self.log_base * len(word)


def _radial_green(rank: int, absorbing_radius: int) -> np.ndarray:
    """Occupation times u(n) of the sphere-level chain of the uniform walk
    on the 2*rank-regular tree, killed on exiting level absorbing_radius-1.

    Tree-automorphism invariance gives G(o,x) = u(|x|)/#S_{|x|}.
    """
    R = absorbing_radius
    q = 2 * rank
    down, up = 1.0 / q, (q - 1.0) / q
    main = np.ones(R)
    lower = np.zeros(R - 1)
    upper = np.zeros(R - 1)
    # (I - P^T) u = delta_0 with P the level-chain kernel
    upper[:] = -down          # mass flowing down from level n+1 to n
    lower[0] = -1.0           # level 0 always steps up
    lower[1:] = -up
    A = scipy.sparse.diags([lower, main, upper], [-1, 0, 1], format="csc")
    rhs = np.zeros(R)
    rhs[0] = 1.0
    return scipy.sparse.linalg.spsolve(A, rhs)


def green_function(
    group: GroupPresentation,
    walk: WalkSpec,
    g: Element,
    absorbing_radius: int,
) -> float:
    """G(o, g) for the killed walk: solve (I - P)u = delta_o with zero
    boundary outside the ball of the given radius."""
    n = len(g.word)
    if n >= absorbing_radius:
        raise MetricError("element outside the absorbing ball")
    if isinstance(group, FreeGroup) and walk.is_uniform():
        u = _radial_green(group.rank, absorbing_radius)
        sphere = 1 if n == 0 else 2 * group.rank * (2 * group.rank - 1) ** (n - 1)
        return float(u[n]) / sphere
    # generic sparse solve on the enumerated ball
    ball = group.ball_words(absorbing_radius - 1)
    index = {w: i for i, w in enumerate(ball)}
    rows, cols, vals = [], [], []
    for w, i in index.items():
        rows.append(i)
        cols.append(i)
        vals.append(1.0 - walk.include_identity)
        for s, p in walk.probabilities.items():
            target = group.extend(w, s)
            j = index.get(target)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(-p)
    A = scipy.sparse.csc_matrix(
        (vals, (rows, cols)), shape=(len(ball), len(ball))
    )
    rhs = np.zeros(len(ball))
    rhs[index[()]] = 1.0
    # occupation measure solves (I - P)^T u = delta_o; P symmetric here
    u = scipy.sparse.linalg.spsolve(A.T, rhs)
    residual = np.linalg.norm(A.T @ u - rhs)
    if residual > 1e-8:
        raise MetricError(f"Green solve ill-conditioned, residual {residual:.2e}")
    return float(u[index[g.word]])


class GreenNumeric(MetricModel):
    kind = "green_numeric"

    def __init__(
        self,
        group: GroupPresentation,
        walk: Optional[WalkSpec] = None,
        absorbing_radius: int = 30,
        safety_margin: int = 10,
    ):
        super().__init__(group)
        self.walk = walk if walk is not None else WalkSpec.uniform(group)
        self.absorbing_radius = absorbing_radius
        self.safety_margin = safety_margin
        self._g_oo = green_function(
            group, self.walk, group.identity(), absorbing_radius
        )

    def _eval(self, word: Word) -> float:
        if len(word) > self.absorbing_radius - self.safety_margin:
            raise MetricError(
                "element too close to the absorbing boundary; "
                "increase absorbing_radius"
            )
        g = green_function(
            self.group, self.walk, Element(self.group, word), self.absorbing_radius
        )
        return -math.log(g / self._g_oo)


def _base_point_frame(z: complex) -> np.ndarray:
    """SL(2,R) matrix sending i to z in the upper half-plane."""
    y = math.sqrt(z.imag)
    return np.array([[y, z.real / y], [0.0, 1.0 / y]])


def _scaled_matrix(group: SchottkyGroup, word: Word) -> tuple[np.ndarray, float]:
    """Matrix of the word with entries renormalized, plus log of the factor
    taken out.  Needed for traces of high powers."""
    mat = np.eye(2)
    log_scale = 0.0
    for s in reversed(word):
        gen = group.matrices[abs(s) - 1]
        if s < 0:
            gen = np.linalg.inv(gen)
        mat = gen @ mat
        top = np.max(np.abs(mat))
        if top > 1e100:
            mat /= top
            log_scale += math.log(top)
    return mat, log_scale


class FuchsianOrbit(MetricModel):
    """d(o, g) = hyperbolic distance from the base point to its image under
    the matrix representation, in the upper half-plane."""

    kind = "fuchsian_orbit"

    def __init__(self, group: SchottkyGroup, base_point: complex = 1j):
        if not isinstance(group, SchottkyGroup):
            raise MetricError("orbit metric needs a matrix model")
        if base_point.imag <= 0:
            raise MetricError("base point must lie in the upper half-plane")
        super().__init__(group)
        self.base_point = complex(base_point)
        self._frame = _base_point_frame(self.base_point)
        self._frame_inv = np.linalg.inv(self._frame)

    def _eval(self, word: Word) -> float:
        if len(word) <= 24:
            mat, log_scale = self.group.matrix_of(word), 0.0
        else:
            mat, log_scale = _scaled_matrix(self.group, word)
        # cosh d(z0, M z0) = ||C^-1 M C||_F^2 / 2 for det-1 M, C: i -> z0;
        # avoids the catastrophic cancellation of the Mobius-image formula
        n = self._frame_inv @ mat @ self._frame
        log_cosh = math.log(float(np.sum(n * n)) / 2.0) + 2.0 * log_scale
        if log_cosh <= 0.0:
            return 0.0
        if log_cosh > 30.0:
            # acosh(x) = log(2x) - O(x^-2)
            return log_cosh + math.log(2.0)
        return math.acosh(math.exp(log_cosh))


class LinearCombination(MetricModel):
    """Positive linear combination of metrics on the same group."""

    kind = "linear_combination"

    def __init__(self, terms: Sequence[tuple[float, MetricModel]]):
        if not terms:
            raise MetricError("empty combination")
        group = terms[0][1].group
        for c, m in terms:
            if m.group is not group:
                raise MetricError("metrics live on different groups")
            if c < 0:
                raise MetricError("coefficients must be nonnegative")
        if all(c == 0 for c, _ in terms):
            raise MetricError("combination is identically zero")
        super().__init__(group)
        self.terms = list(terms)

    def _eval(self, word: Word) -> float:
        return sum(c * m.dist_word(word) for c, m in self.terms)


# -- derived quantities -----------------------------------------------------

def gromov_product(metric: MetricModel, x: Element, y: Element) -> float:
    dx = metric.dist(x)
    dy = metric.dist(y)
    dxy = metric.dist_word(invert_word(x.word) + y.word)
    return 0.5 * (dx + dy - dxy)


@dataclass(frozen=True)
class BusemannQuery:
    x: Element
    ray_prefix: Word  # geodesic word toward the boundary point
    depth: int


def _is_geodesic_word(group: GroupPresentation, word: Word) -> bool:
    for j in range(len(word) + 1):
        if len(group.normal_form(word[:j])) != j:
            return False
    return True


def busemann_trunc(metric: MetricModel, q: BusemannQuery) -> float:
    """Truncated Busemann value d(x, p_n) - d(o, p_n) at ray depth n."""
    if q.depth > len(q.ray_prefix):
        raise MetricError("ray prefix shorter than requested depth")
    if not _is_geodesic_word(metric.group, q.ray_prefix):
        raise MetricError("ray prefix is not a geodesic word")
    p = q.ray_prefix[: q.depth]
    return metric.dist_word(invert_word(q.x.word) + p) - metric.dist_word(p)


@dataclass(frozen=True)
class TranslationLength:
    value: float
    error_bar: float
    method: str
    low_confidence: bool = False

    @property
    def is_torsion(self) -> bool:
        # class is torsion exactly when the translation length vanishes
        return self.value < 10.0 * max(self.error_bar, 1e-12)


def translation_length(
    metric: MetricModel, c: ConjClass, power_cap: int = 64
) -> TranslationLength:
    """lim d(o, g^m)/m for the class representative."""
    g = c.representative
    if g.length == 0:
        return TranslationLength(0.0, 0.0, "identity")
    group = metric.group
    if isinstance(metric, (WordMetric, ScaledWordMetric)) and isinstance(
        group, FreeGroup
    ):
        factor = getattr(metric, "factor", 1.0)
        w = FreeGroup.cyclic_reduce(g.word)
        return TranslationLength(factor * len(w), 0.0, "cyclic_length")
    if isinstance(metric, GreenClosedForm):
        w = FreeGroup.cyclic_reduce(g.word)
        return TranslationLength(metric.log_base * len(w), 0.0, "cyclic_length")
    if isinstance(metric, FuchsianOrbit):
        w = FreeGroup.cyclic_reduce(g.word)
        mat, log_scale = _scaled_matrix(group, w)
        half_tr = abs(np.trace(mat)) * math.exp(log_scale) / 2.0
        if half_tr <= 1.0:
            return TranslationLength(0.0, 0.0, "trace")
        return TranslationLength(2.0 * math.acosh(half_tr), 0.0, "trace")
    # generic: Richardson extrapolation of d(o, g^m)/m along m = 2^j
    powers = []
    m = 2
    while m <= power_cap:
        powers.append(m)
        m *= 2
    if len(powers) < 3:
        raise MetricError("power_cap too small for extrapolation")
    raw = []
    gm = g
    last_m = 1
    for m in powers:
        gm = gm * gm if m == 2 * last_m else g ** m
        last_m = m
        raw.append(metric.dist(gm) / m)
    # d(o,g^m) = m*l + O(1), so 2*a_{2m} - a_m cancels the 1/m term
    extr = [2.0 * raw[i + 1] - raw[i] for i in range(len(raw) - 1)]
    value = extr[-1]
    err = max(abs(extr[-1] - extr[-2]), abs(raw[-1] - extr[-1]) * 0.1)
    return TranslationLength(
        max(value, 0.0), err, "richardson", low_confidence=err > 1e-2
    )


@dataclass
class HyperbolicityReport:
    samples_used: int
    violations: int
    max_violation: float
    fitted_c: float
    inconclusive: bool


def check_strong_hyperbolicity(
    metric: MetricModel,
    sample_count: int = 400,
    R0: float = 4.0,
    c_candidate: float = 0.25,
    ball_radius: int = 6,
    seed: int = 0,
) -> HyperbolicityReport:
    """Sampled four-point test: whenever the configuration gap
    d(x,y) - d(x,x') + d(x',y') - d(y,y') is at least R >= R0, the
    cross difference d(x,y) - d(x',y) - d(x,y') + d(x',y') must be
    at most e^{-cR} in absolute value."""
    rng = np.random.default_rng(seed)
    words = metric.group.ball_words(ball_radius)
    used = 0
    violations = 0
    max_violation = 0.0
    fitted = math.inf
    d = metric.dist_word
    inv = invert_word
    for _ in range(sample_count * 8):
        if used >= sample_count:
            break
        idx = rng.integers(0, len(words), size=4)
        x, xp, y, yp = (words[i] for i in idx)
        dxy = d(inv(x) + y)
        dxxp = d(inv(x) + xp)
        dxpyp = d(inv(xp) + yp)
        dyyp = d(inv(y) + yp)
        gap = dxy - dxxp + dxpyp - dyyp
        if gap < R0:
            continue
        used += 1
        dxpy = d(inv(xp) + y)
        dxyp = d(inv(x) + yp)
        diff = abs(dxy - dxpy - dxyp + dxpyp)
        if diff > math.exp(-c_candidate * gap) + 1e-12:
            violations += 1
            max_violation = max(max_violation, diff)
        if diff > 1e-14:
            fitted = min(fitted, -math.log(diff) / gap)
    if used == 0:
        return HyperbolicityReport(0, 0, 0.0, 0.0, inconclusive=True)
    if not math.isfinite(fitted):
        fitted = c_candidate  # all differences vanished at working precision
    return HyperbolicityReport(used, violations, max_violation, fitted, False)
