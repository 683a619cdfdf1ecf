"""Thermodynamic formalism on the coding subshift.

Metrics enter as depth-k cylinder potentials: the value on a window of k
edge labels is d(o, ev(window)) - d(o, ev(window minus its first edge)).
Transfer matrices live on (k-1)-edge blocks of a component; pressures are
log Perron roots, growth rates are pressure zeros, Manhattan curves are
pressure level sets, and the correlation exponent comes from the slope -1
point of the Manhattan curve.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from .automaton import IDENTITY_LABEL, GeodesicAutomaton
from .groups import Word
from .metrics import MetricModel
from .shift import Component, ShiftError, arithmeticity

DENSE_LIMIT = 600


class ThermoError(Exception):
    pass


class CylinderPotential:
    """Depth-k locally constant approximation of the metric potential.

    Values depend only on the label word of a window (identity labels
    evaluate through as nothing), so one lazy table serves every
    component of the same automaton.
    """

    def __init__(
        self,
        metric: MetricModel,
        depth: int,
        tag: str = "",
    ):
        if depth < 1:
            raise ThermoError("depth must be >= 1")
        self.metric = metric
        self.depth = depth
        self.tag = tag or metric.kind
        self._table: dict[Word, float] = {}

    def value(self, labels: Word) -> float:
        """Psi on the window; windows shorter than the depth are evaluated
        with their own length (exact truncation at path ends)."""
        labels = tuple(s for s in labels if s != IDENTITY_LABEL)
        v = self._table.get(labels)
        if v is None:
            d = self.metric.dist_word
            v = d(labels) - d(labels[1:]) if labels else 0.0
            self._table[labels] = v
        return v

    def birkhoff(self, labels: Word) -> float:
        """Truncated-window Birkhoff sum along a finite path."""
        k = self.depth
        return sum(
            self.value(labels[i : i + k]) for i in range(len(labels))
        )

    def cycle_sum(self, labels: Word) -> float:
        """Birkhoff sum around a periodic orbit (windows wrap)."""
        n = len(labels)
        ext = labels + labels * (self.depth // n + 1)
        return sum(self.value(ext[i : i + self.depth]) for i in range(n))

    def at_depth(self, depth: int) -> "CylinderPotential":
        p = CylinderPotential(self.metric, depth, self.tag)
        return p


def cylinder_potential(
    metric: MetricModel, depth: int, tag: str = ""
) -> CylinderPotential:
    return CylinderPotential(metric, depth, tag)


def truncation_error(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    sample_cap: int = 2000,
) -> float:
    """epsilon_k = max |Psi^(k+1) - Psi^(k)| over sampled admissible
    windows of the component."""
    k = potential.depth
    deeper = potential.at_depth(k + 1)
    eps = 0.0
    n = 0
    for v0, labels in _blocks(aut, comp.vertices, k + 2, cap=sample_cap):
        w = labels
        eps = max(eps, abs(deeper.value(w[: k + 1]) - potential.value(w[:k])))
        n += 1
    if n == 0:
        raise ThermoError("component admits no windows at this depth")
    return eps


# -- transfer matrices -------------------------------------------------------

def _blocks(
    aut: GeodesicAutomaton,
    vertices: frozenset,
    n_edges: int,
    cap: Optional[int] = None,
    allow_identity: bool = False,
):
    """Paths with the given number of edges inside the vertex set, as
    (start_vertex, label word), in deterministic sorted order."""
    out = []
    for v in sorted(vertices):
        stack = [(v, ())]
        while stack:
            u, labels = stack.pop()
            if len(labels) == n_edges:
                out.append((v, labels))
                if cap is not None and len(out) >= cap:
                    return out
                continue
            for label, w in sorted(aut.transitions[u], reverse=True):
                if label == IDENTITY_LABEL and not allow_identity:
                    continue
                if w in vertices:
                    stack.append((w, labels + (label,)))
    return out


@dataclass
class TransferMatrix:
    blocks: list  # (start_vertex, labels) per index
    matrix: scipy.sparse.csr_matrix
    depth: int

    @property
    def n(self) -> int:
        return len(self.blocks)


def transfer_matrix(
    aut: GeodesicAutomaton,
    vertices: frozenset,
    terms: Sequence[tuple[complex, CylinderPotential]],
    depth: Optional[int] = None,
    allow_identity: bool = False,
    exclude_zero_loop: bool = False,
    dtype=float,
) -> TransferMatrix:
    """Weighted adjacency on (depth-1)-edge blocks; the transition along a
    depth-edge window carries weight exp(sum_i c_i * Psi_i(window prefix))."""
    k = depth if depth is not None else max(p.depth for _, p in terms)
    blocks = _blocks(aut, vertices, k - 1, allow_identity=allow_identity)
    index = {b: i for i, b in enumerate(blocks)}
    rows, cols, vals = [], [], []
    for b_idx, (v0, labels) in enumerate(blocks):
        u = v0
        for s in labels:
            u = aut.step(u, s)
        v1 = aut.step(v0, labels[0]) if labels else v0
        for label, w in aut.transitions[u]:
            if label == IDENTITY_LABEL and not allow_identity:
                continue
            if w not in vertices:
                continue
            if (
                exclude_zero_loop
                and u == aut.zero_state
                and w == aut.zero_state
            ):
                continue
            window = labels + (label,)
            target = (v1, window[1:]) if labels else (w, ())
            t_idx = index.get(target)
            if t_idx is None:
                continue
            exponent = sum(
                c * p.value(window[: p.depth]) for c, p in terms
            )
            rows.append(b_idx)
            cols.append(t_idx)
            vals.append(cmath.exp(exponent) if dtype is complex else math.exp(
                exponent.real if isinstance(exponent, complex) else exponent
            ))
    mat = scipy.sparse.csr_matrix(
        (np.array(vals, dtype=dtype), (rows, cols)),
        shape=(len(blocks), len(blocks)),
    )
    return TransferMatrix(blocks, mat, k)


def _spectral_radius_real(mat: scipy.sparse.csr_matrix, tol: float = 1e-13) -> float:
    n = mat.shape[0]
    if n == 0:
        raise ThermoError("empty transfer matrix")
    if n <= DENSE_LIMIT:
        eig = np.linalg.eigvals(mat.toarray())
        return float(np.max(np.abs(eig)))
    # ARPACK with a fixed start vector for reproducibility
    for ncv in (20, 64, 128):
        try:
            vals = scipy.sparse.linalg.eigs(
                mat,
                k=1,
                which="LM",
                v0=np.ones(n),
                tol=1e-13,
                ncv=min(ncv, n - 1),
                maxiter=100000,
                return_eigenvectors=False,
            )
            return float(np.abs(vals[0]))
        except scipy.sparse.linalg.ArpackError:
            continue
    # residual-checked power iteration on the aperiodicity shift A + I
    v = np.ones(n) / math.sqrt(n)
    for _ in range(200000):
        w = mat @ v + v
        nl = float(np.linalg.norm(w))
        v = w / nl
        resid = float(np.linalg.norm(mat @ v + v - nl * v))
        if resid <= 1e-11 * nl:
            return nl - 1.0
    if n <= 4000:
        eig = np.linalg.eigvals(mat.toarray())
        return float(np.max(np.abs(eig)))
    raise ThermoError("spectral radius computation did not converge")


def pressure_terms(
    aut: GeodesicAutomaton,
    comp: Component,
    terms: Sequence[tuple[float, CylinderPotential]],
) -> float:
    """log spectral radius of the transfer matrix with the given signed
    potential combination."""
    tm = transfer_matrix(aut, comp.vertices, terms)
    return math.log(_spectral_radius_real(tm.matrix))


def pressure(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    s: float,
) -> float:
    """P(-s * Psi) on the component."""
    return pressure_terms(aut, comp, [(-s, potential)])


def pressure_orbit_estimate(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    s: float,
    n: int,
) -> float:
    """(1/n) log trace(L^n): the n-periodic-orbit approximation of the
    pressure; converges to the eigenvalue version as n grows."""
    tm = transfer_matrix(aut, comp.vertices, [(-s, potential)])
    power = tm.matrix
    for _ in range(n - 1):
        power = power @ tm.matrix
    tr = float(power.diagonal().sum())
    if tr <= 0:
        raise ThermoError(f"no closed orbits of period {n}")
    return math.log(tr) / n


def _bisect_root(f, lo: float, hi: float, width: float = 1e-8) -> float:
    flo, fhi = f(lo), f(hi)
    expand = 0
    while flo * fhi > 0:
        lo, hi = lo - (hi - lo), hi + (hi - lo)
        flo, fhi = f(lo), f(hi)
        expand += 1
        if expand > 6:
            raise ThermoError("root bracketing failed")
    root = scipy.optimize.brentq(f, lo, hi, xtol=width, rtol=8.9e-16)
    # two secant polish steps past the bracket tolerance
    a, b = root - width, root
    fa, fb = f(a), f(b)
    for _ in range(2):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        a, fa, b, fb = b, fb, c, f(c)
    return b


def growth_rate(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    bracket: tuple[float, float] = (0.0, 4.0),
) -> float:
    """The unique v with P(-v * Psi) = 0."""
    return _bisect_root(
        lambda s: pressure(aut, comp, potential, s), bracket[0], bracket[1]
    )


def choose_depth(
    aut: GeodesicAutomaton,
    comp: Component,
    metric: MetricModel,
    s_ref: float = 1.0,
    tol: float = 1e-6,
    k_max: int = 9,
) -> CylinderPotential:
    """Smallest depth at which the reference pressure stops moving."""
    prev = None
    for k in range(1, k_max + 1):
        pot = CylinderPotential(metric, k)
        val = pressure(aut, comp, pot, s_ref)
        if prev is not None and abs(val - prev[1]) < tol:
            return prev[0]
        prev = (pot, val)
    return prev[0]


# -- Gibbs data --------------------------------------------------------------

@dataclass
class GibbsData:
    tm: TransferMatrix
    eigenvalue: float
    right: np.ndarray  # h, positive
    left: np.ndarray  # nu, positive, nu . h = 1
    stationary: np.ndarray  # pi(b) = nu(b) h(b), sums to 1
    s: float

    @property
    def pressure(self) -> float:
        return math.log(self.eigenvalue)

    def transition(self) -> np.ndarray:
        """Markov kernel q(b -> b') = A(b,b') h(b') / (lam h(b))."""
        a = self.tm.matrix.toarray()
        return a * self.right[None, :] / (self.eigenvalue * self.right[:, None])

    def cylinder_mass(self, block_path: Sequence[int]) -> float:
        q = self.transition()
        mass = self.stationary[block_path[0]]
        for a, b in zip(block_path, block_path[1:]):
            mass *= q[a, b]
        return mass


def gibbs_data(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    s: float,
) -> GibbsData:
    tm = transfer_matrix(aut, comp.vertices, [(-s, potential)])
    a = tm.matrix.toarray()
    if a.shape[0] > 4000:
        raise ThermoError("component too large for dense eigendata")
    w, vr = np.linalg.eig(a)
    i = int(np.argmax(w.real))
    lam = float(w[i].real)
    h = vr[:, i].real
    h = h * np.sign(h[np.argmax(np.abs(h))])
    if np.min(h) <= 0:
        raise ThermoError("Perron right eigenvector not positive")
    wl, vl = np.linalg.eig(a.T)
    j = int(np.argmax(wl.real))
    nu = vl[:, j].real
    nu = nu * np.sign(nu[np.argmax(np.abs(nu))])
    if np.min(nu) <= 0:
        raise ThermoError("Perron left eigenvector not positive")
    resid = float(np.linalg.norm(a @ h - lam * h)) / max(lam, 1.0)
    if resid > 1e-9:
        raise ThermoError(f"eigen residual {resid:.2e} above tolerance")
    nu = nu / float(nu @ h)
    pi = nu * h
    pi = pi / pi.sum()
    return GibbsData(tm, lam, h, nu, pi, s)


def gibbs_ratio_check(
    aut: GeodesicAutomaton,
    comp: Component,
    gd: GibbsData,
    potential: CylinderPotential,
    depth_test: int = 6,
) -> tuple[float, float]:
    """Ratio mu[cylinder] / exp(-nP + S_n Phi) over all cylinders of
    length up to depth_test, Phi = -s Psi.  Returns (min, max)."""
    k = gd.tm.depth
    index = {b: i for i, b in enumerate(gd.tm.blocks)}
    q = gd.transition()
    lo, hi = math.inf, -math.inf
    for n in range(k, depth_test + 1):
        for v0, labels in _blocks(aut, comp.vertices, n):
            # block path underlying the cylinder
            path = []
            u = v0
            verts = [v0]
            for s_ in labels:
                u = aut.step(u, s_)
                verts.append(u)
            ok = True
            for i in range(n - k + 2):
                b = (verts[i], labels[i : i + k - 1])
                bi = index.get(b)
                if bi is None:
                    ok = False
                    break
                path.append(bi)
            if not ok:
                continue
            mass = gd.stationary[path[0]]
            for a_, b_ in zip(path, path[1:]):
                mass *= q[a_, b_]
            # full truncated Birkhoff sum over all n positions: including
            # the tail windows keeps the constants depth-independent
            s_n = -gd.s * potential.birkhoff(labels)
            ref = math.exp(-n * gd.pressure + s_n)
            ratio = mass / ref
            lo, hi = min(lo, ratio), max(hi, ratio)
    if not math.isfinite(lo):
        raise ThermoError("no cylinders at requested depths")
    return lo, hi


# -- Manhattan curves and correlation ----------------------------------------

def manhattan(
    aut: GeodesicAutomaton,
    comp: Component,
    potential_d: CylinderPotential,
    t: float,
) -> float:
    """theta_{d/S}(t) = P(-t Psi_d)."""
    return pressure(aut, comp, potential_d, t)


def manhattan_pair(
    aut: GeodesicAutomaton,
    comp: Component,
    potential_d: CylinderPotential,
    potential_dstar: CylinderPotential,
    t: float,
    bracket: tuple[float, float] = (-4.0, 4.0),
) -> float:
    """theta_{dstar/d}(t): the s with P(-s Psi_d - t Psi_dstar) = 0."""

    def f(s: float) -> float:
        return pressure_terms(
            aut, comp, [(-s, potential_d), (-t, potential_dstar)]
        )

    return _bisect_root(f, bracket[0], bracket[1])


def _theta_derivative(theta, t: float, h: float = 1e-4) -> float:
    """5-point central difference with a Richardson cross-check."""
    d1 = (
        theta(t - 2 * h) - 8 * theta(t - h) + 8 * theta(t + h) - theta(t + 2 * h)
    ) / (12 * h)
    d_coarse = (theta(t + 2 * h) - theta(t - 2 * h)) / (4 * h)
    if abs(d1 - d_coarse) > 1e-2 * max(1.0, abs(d1)):
        raise ThermoError("derivative estimate unstable")
    return d1


@dataclass
class CorrelationExponent:
    xi: float
    alpha: float
    theta_at_xi: float
    degenerate: bool


def correlation_exponent(
    aut: GeodesicAutomaton,
    comp: Component,
    potential_d: CylinderPotential,
    potential_dstar: CylinderPotential,
) -> CorrelationExponent:
    """xi solves theta'(xi) = -1 for the pair Manhattan curve of two
    growth-normalized metrics; alpha = xi + theta(xi).  A dependent pair
    yields the affine curve theta(t) = 1 - t and is flagged degenerate."""

    cache: dict[float, float] = {}
    last = [1.0]  # theta(0) = 1 for a growth-normalized pair

    def theta(t: float) -> float:
        v = cache.get(t)
        if v is None:
            # warm-started bracket: theta is 1-Lipschitz on normalized pairs
            g = last[0]
            v = manhattan_pair(
                aut, comp, potential_d, potential_dstar, t,
                bracket=(g - 0.6, g + 0.6),
            )
            cache[t] = v
            last[0] = v
        return v

    t0, t1 = theta(0.0), theta(1.0)
    mid = theta(0.5)
    if abs(mid - 0.5 * (t0 + t1)) < 1e-9:
        # affine curve: the metrics are roughly similar, alpha degenerates to 1
        return CorrelationExponent(0.5, 1.0, mid, True)

    def slope_plus_one(t: float) -> float:
        return _theta_derivative(theta, t) + 1.0

    # alpha = xi + theta(xi) is stationary at the root of theta' + 1, so a
    # 1e-6 bracket on xi already gives alpha to ~1e-12
    xi = _bisect_root(slope_plus_one, 0.05, 0.95, width=1e-6)
    alpha = xi + theta(xi)
    return CorrelationExponent(xi, alpha, theta(xi), False)


# -- complex spectra ---------------------------------------------------------

@dataclass
class ScanPoint:
    t: float
    rho: float
    unit_distance: float  # |1 - leading eigenvalue|
    gap: float  # 1 - rho
    exact: bool  # dense eigenvalues vs norm estimate


def spectral_scan(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    v: float,
    t_grid: Sequence[float],
    dense_limit: int = 1500,
) -> list[ScanPoint]:
    """Spectral radius profile of L_{v+it} over the grid.  Dense
    eigenvalues below the size limit (leading eigenvalue reported); norm
    based repeated-squaring estimate above it."""
    out = []
    for t in t_grid:
        tm = transfer_matrix(
            aut,
            comp.vertices,
            [(-(v + 1j * t), potential)],
            dtype=complex,
        )
        n = tm.matrix.shape[0]
        if n <= dense_limit:
            eig = np.linalg.eigvals(tm.matrix.toarray())
            lead = eig[int(np.argmax(np.abs(eig)))]
            rho = float(np.abs(lead))
            out.append(
                ScanPoint(t, rho, float(abs(1.0 - lead)), 1.0 - rho, True)
            )
        else:
            if n > 4000:
                raise ThermoError("scan matrix too large")
            # normalized repeated squaring: rho = lim ||A^{2^m}||^{1/2^m}
            m = tm.matrix.toarray()
            log_rho = 0.0
            weight = 1.0
            for _ in range(14):
                nrm = float(np.linalg.norm(m, ord=np.inf))
                log_rho += weight * math.log(nrm)
                weight /= 2.0
                m = (m / nrm) @ (m / nrm)
            nrm = float(np.linalg.norm(m, ord=np.inf))
            log_rho += weight * math.log(nrm)
            rho = math.exp(log_rho)
            out.append(ScanPoint(t, rho, math.nan, 1.0 - rho, False))
    return out


# -- weak mixing -------------------------------------------------------------

class _RoofPotential:
    """Birkhoff values of the roof S_N Psi over sigma^N periodic orbits,
    expressed through the sigma-orbit values."""

    def __init__(self, base: CylinderPotential, N: int):
        self.base = base
        self.N = N
        self.depth = base.depth

    def cycle_sum(self, labels: Word) -> float:
        l = len(labels)
        l_prime = l // math.gcd(l, self.N)
        return self.base.cycle_sum(labels) * (self.N * l_prime / l)


@dataclass
class MixingReport:
    verdict: str  # "weak_mixing" | "not_weak_mixing" | "inconclusive"
    lattice_gap: Optional[float]
    arithmeticity: object


def mixing_check(
    aut: GeodesicAutomaton,
    comp: Component,
    potential: CylinderPotential,
    N: int = 1,
    l_max: int = 6,
) -> MixingReport:
    """Weak mixing of the suspension with roof S_N Psi: non-arithmetic
    roof values imply weak mixing, a lattice gives the period."""
    roof = _RoofPotential(potential, N)
    rep = arithmeticity(aut, comp, roof, l_max=l_max)
    if rep.verdict == "lattice":
        return MixingReport("not_weak_mixing", rep.gap, rep)
    if rep.verdict == "non_arithmetic":
        return MixingReport("weak_mixing", None, rep)
    return MixingReport("inconclusive", None, rep)
