"""Metrics as distance models: closed forms, numeric solves, hyperbolicity."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cannonlab import groups, metrics

words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=10).map(tuple)


def test_word_metric_is_reduced_length(free2):
    wm = metrics.WordMetric(free2)
    assert wm.dist_word((1, -1)) == 0.0
    assert wm.dist_word((1, 2, 1)) == 3.0
    assert wm.dist_between(free2.element((1,)), free2.element((2,))) == 2.0


def test_scaled_word_metric(free2):
    sm = metrics.ScaledWordMetric(free2, 0.25)
    assert sm.dist_word((1, 2)) == 0.5


def test_green_closed_form_matches_tree_formula(free2):
    gm = metrics.GreenClosedForm(free2)
    for n in range(5):
        w = tuple([1, 2] * n)[:n]
        assert abs(gm.dist_word(w) - n * math.log(3)) < 1e-12


def test_green_function_radial_values(free2):
    walk = metrics.WalkSpec.uniform(free2)
    o = free2.identity()
    g_oo = metrics.green_function(free2, walk, o, 30)
    assert abs(g_oo - 1.5) < 1e-6
    x = free2.element((1, 2))
    g_ox = metrics.green_function(free2, walk, x, 30)
    assert abs(g_ox - 1.5 / 9.0) < 1e-6


def test_green_numeric_agrees_with_closed_form(free2):
    gm = metrics.GreenClosedForm(free2)
    gn = metrics.GreenNumeric(free2)
    for w in [(1,), (1, 2), (1, 2, -1), (2, 2, 2, 2)]:
        assert abs(gn.dist_word(w) - gm.dist_word(w)) < 1e-6


def test_walk_spec_requires_symmetry(free2):
    with pytest.raises(metrics.MetricError):
        metrics.WalkSpec({1: 0.6, -1: 0.1, 2: 0.15, -2: 0.15})
    with pytest.raises(metrics.MetricError):
        metrics.WalkSpec({1: 0.3, -1: 0.3, 2: 0.3, -2: 0.3})
    assert metrics.WalkSpec.uniform(free2).is_uniform()


@given(words)
@settings(max_examples=40)
def test_fuchsian_distance_is_symmetric_under_inversion(w):
    sch = groups.standard_schottky()
    fo = metrics.FuchsianOrbit(sch)
    assert abs(fo.dist_word(w) - fo.dist_word(groups.invert_word(w))) < 1e-8


def test_fuchsian_distance_closed_form_on_generator(schottky, fuchsian):
    # d(o, g o) = acosh(||C^-1 M C||_F^2 / 2) for the det-1 matrix
    m = schottky.matrices[0]
    frame_inv, frame = fuchsian._frame_inv, fuchsian._frame
    conj = frame_inv @ m @ frame
    expect = math.acosh(float(np.sum(conj * conj)) / 2.0)
    assert abs(fuchsian.dist_word((1,)) - expect) < 1e-12


def test_fuchsian_long_words_stay_finite(fuchsian):
    w = tuple([1, 2, -1, 2] * 20)
    d = fuchsian.dist_word(w)
    assert 100.0 < d < 600.0
    # scaled product path agrees with the plain product on medium words
    w2 = w[:20]
    mat, log_scale = metrics._scaled_matrix(fuchsian.group, w2)
    plain = fuchsian.group.matrix_of(w2)
    assert np.allclose(mat * math.exp(log_scale), plain)


def test_fuchsian_triangle_inequality_on_samples(schottky, fuchsian):
    rng = np.random.default_rng(0)
    ws = schottky.ball_words(4)
    for _ in range(200):
        i, j = rng.integers(0, len(ws), size=2)
        x, y = schottky.element(ws[i]), schottky.element(ws[j])
        assert fuchsian.dist_between(x, y) <= (
            fuchsian.dist(x) + fuchsian.dist(y) + 1e-9
        )


def test_linear_combination_is_entrywise(free2):
    wm = metrics.WordMetric(free2)
    gm = metrics.GreenClosedForm(free2)
    lc = metrics.LinearCombination([(2.0, wm), (1.0, gm)])
    w = (1, 2, 1)
    assert abs(lc.dist_word(w) - (2.0 * 3 + 3 * math.log(3))) < 1e-12
    with pytest.raises(metrics.MetricError):
        metrics.LinearCombination([])
    with pytest.raises(metrics.MetricError):
        metrics.LinearCombination([(-1.0, wm)])


def test_gromov_product_on_tree(free2):
    wm = metrics.WordMetric(free2)
    x = free2.element((1, 2))
    y = free2.element((1, -2))
    # common prefix has length 1
    assert abs(metrics.gromov_product(wm, x, y) - 1.0) < 1e-12


def test_translation_length_closed_forms(free2, schottky, fuchsian):
    wm = metrics.WordMetric(free2)
    c = free2.canonical_class(free2.element((1, 2, -1)))
    t = metrics.translation_length(wm, c)
    assert t.value == 1.0 and not t.is_torsion
    ident = free2.canonical_class(free2.identity())
    assert metrics.translation_length(wm, ident).is_torsion
    # matrix model: 2 acosh(|tr| / 2)
    cs = schottky.canonical_class(schottky.element((1,)))
    ts = metrics.translation_length(fuchsian, cs)
    assert abs(ts.value - 2.0 * math.acosh(1.5)) < 1e-9


def test_translation_length_green_scales_word(free2):
    gm = metrics.GreenClosedForm(free2)
    c = free2.canonical_class(free2.element((1, 2)))
    t = metrics.translation_length(gm, c)
    assert abs(t.value - 2.0 * math.log(3)) < 1e-9


def test_busemann_requires_geodesic_prefix(free2):
    wm = metrics.WordMetric(free2)
    q = metrics.BusemannQuery(x=free2.element((1,)), ray_prefix=(1, 1, 1), depth=3)
    val = metrics.busemann_trunc(wm, q)
    assert abs(val + 1.0) < 1e-12  # moving along the ray decreases the cocycle
    with pytest.raises(metrics.MetricError):
        metrics.busemann_trunc(
            wm,
            metrics.BusemannQuery(x=free2.element((1,)), ray_prefix=(1, -1), depth=2),
        )


def test_strong_hyperbolicity_holds_for_fuchsian_orbit(fuchsian):
    report = metrics.check_strong_hyperbolicity(fuchsian, sample_count=300)
    assert report.violations == 0
    assert not report.inconclusive


def test_strong_hyperbolicity_flags_word_metric(free2):
    # tree distance has zero-decay four-point differences but the sampled
    # configurations on a tree are exactly degenerate, so no violations
    wm = metrics.WordMetric(free2)
    report = metrics.check_strong_hyperbolicity(wm, sample_count=200)
    assert report.max_violation <= 1e-9
