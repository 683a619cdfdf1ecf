"""Geodesic acceptors: construction, validation, serialization."""
import json
import warnings

import pytest

from cannonlab import automaton, groups, shift


def test_free_group_acceptor_has_five_states(free2_aut):
    assert free2_aut.n_states == 5
    assert free2_aut.shortlex_unique


def test_accepted_counts_match_sphere_sizes(free2_aut):
    counts = free2_aut.accepted_counts(8)
    assert counts == [1] + [4 * 3 ** (n - 1) for n in range(1, 9)]


def test_accepted_words_evaluate_to_distinct_elements(free2_aut):
    seen = set()
    for word, _ in free2_aut.accepted_words(4):
        g = free2_aut.ev(word)
        assert len(g.word) == len(word)
        assert g.word not in seen
        seen.add(g.word)
    assert len(seen) == 1 + 4 + 12 + 36 + 108


def test_validate_bijection_passes_on_free_group(free2_aut):
    report = automaton.validate_bijection(free2_aut, 6)
    assert report.ok
    assert report.first_failure is None


def test_validate_bijection_detects_dropped_edge(free2_aut):
    u, v, label = free2_aut.edges()[3]
    broken = free2_aut.drop_edge(u, v, label)
    report = automaton.validate_bijection(broken, 4)
    assert not report.ok
    assert report.first_failure["kind"] == "count_mismatch"


def test_surface_acceptor_validates(genus2_aut):
    report = automaton.validate_bijection(genus2_aut, 4)
    assert report.ok


def test_surface_geodesic_acceptor_counts_all_geodesics(genus2):
    acceptor = automaton.build_geodesic_acceptor(genus2, 2)
    counts = acceptor.accepted_counts(4)
    # several geodesic spellings per element once relator halves interact
    assert counts[:4] == [1, 8, 56, 392]
    assert counts[4] > len(genus2.sphere_words(4))


def test_json_round_trip(free2_aut, free2):
    text = free2_aut.to_json()
    doc = json.loads(text)
    assert doc["schema"] == "geodesic-automaton/1"
    back = automaton.GeodesicAutomaton.from_json(text, free2)
    assert back.transitions == free2_aut.transitions
    assert back.to_json() == text


def test_augmentation_adds_absorbing_state(free2_aut):
    aug = automaton.augment(free2_aut)
    assert aug.n_states == free2_aut.n_states + 1
    zero = aug.zero_state
    assert aug.step(zero, automaton.IDENTITY_LABEL) == zero
    for u in range(free2_aut.n_states):
        target = aug.step(u, automaton.IDENTITY_LABEL)
        assert (target == zero) == (u != aug.initial)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        again = automaton.augment(aug)
    assert again is aug
    assert caught and "already augmented" in str(caught[0].message)


def test_saturation_sweep_returns_stable_radius(free2):
    aut, info = automaton.saturate(free2, radii=(1, 2), n_validate=4)
    assert aut.n_states == 5
    assert info["validated_to"] == 4


def test_saturation_failure_raises(free2):
    with pytest.raises(automaton.UnsaturatedError):
        automaton.saturate(free2, radii=(1,))


def test_schottky_acceptor_matches_free_structure(schottky_aut):
    assert schottky_aut.n_states == 5
    report = automaton.validate_bijection(schottky_aut, 5)
    assert report.ok


def test_state_cap_is_enforced(genus2):
    with pytest.raises(groups.ResourceCapError):
        automaton.build_shortlex_acceptor(genus2, 2, state_cap=3)
