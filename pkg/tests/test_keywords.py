from __future__ import annotations

import math

import pytest

from forge.keywords import KeywordParams, score_keyphrases, term_scores

FIXTURE = "Paris is the capital of France. Paris hosts the Louvre."


def _hand_scores() -> dict[str, float]:
    """Feature-by-feature hand computation for the two-sentence fixture.

    Tokens: [Paris, is, the, capital, of, France] / [Paris, hosts, the,
    Louvre]; stopwords is/the/of. Content TFs are paris=2 and 1 for the
    rest, so mean=1.2, population stdev=0.4, max_tf=2, sentences=2.
    """
    ln = math.log

    def s(w_pos, w_rel, w_case, w_freq, w_spread):
        return (w_pos * w_rel) / (w_case + w_freq / w_rel + w_spread / w_rel)

    freq_denom = 1.2 + 0.4
    return {
        # paris: capitalized twice, first sentence 0, both sentences; left
        # neighbours none, right neighbours {is, hosts} -> dl=0, dr=1.
        "paris": s(ln(ln(3)), 1 + (0 + 1) * (2 / 2), 2 / (1 + ln(2)), 2 / freq_denom, 1.0),
        # capital: left {the}, right {of} -> dl=dr=1, tf/max=1/2.
        "capital": s(ln(ln(3)), 1 + 2 * 0.5, 0.0, 1 / freq_denom, 0.5),
        # france: left {of}, no right neighbour (sentence end).
        "france": s(ln(ln(3)), 1 + 1 * 0.5, 1.0, 1 / freq_denom, 0.5),
        # hosts: sentence 1, left {paris}, right {the}.
        "hosts": s(ln(ln(4)), 1 + 2 * 0.5, 0.0, 1 / freq_denom, 0.5),
        # louvre: sentence 1, capitalized, left {the}, no right neighbour.
        "louvre": s(ln(ln(4)), 1 + 1 * 0.5, 1.0, 1 / freq_denom, 0.5),
    }


def _hand_phrase_score(terms: dict[str, float], grams: list[str], tf: int) -> float:
    product = math.prod(terms[g] for g in grams)
    return product / (tf * (1 + sum(terms[g] for g in grams)))


def test_term_scores_match_hand_computation():
    computed = term_scores(FIXTURE)
    expected = _hand_scores()
    assert set(computed) == set(expected)
    for term, value in expected.items():
        assert computed[term] == pytest.approx(value, abs=1e-12), term


def test_fixture_ranking_puts_dominant_term_first():
    phrases = score_keyphrases(FIXTURE, KeywordParams(top_k=6))
    assert phrases[0].phrase == "Paris"

    terms = _hand_scores()
    expected_order = sorted(
        {
            "Paris": _hand_phrase_score(terms, ["paris"], 2),
            "Paris hosts": _hand_phrase_score(terms, ["paris", "hosts"], 1),
            "France": _hand_phrase_score(terms, ["france"], 1),
            "Louvre": _hand_phrase_score(terms, ["louvre"], 1),
            "capital": _hand_phrase_score(terms, ["capital"], 1),
            "hosts": _hand_phrase_score(terms, ["hosts"], 1),
        }.items(),
        key=lambda item: item[1],
    )
    assert [kp.phrase for kp in phrases] == [name for name, _ in expected_order]
    for kp, (_, score) in zip(phrases, expected_order):
        assert kp.score == pytest.approx(score, abs=1e-12)


def test_top_k_limits_phrase_count():
    for k in (1, 2, 3):
        assert len(score_keyphrases(FIXTURE, KeywordParams(top_k=k))) == k


def test_single_word_text():
    phrases = score_keyphrases("Hello", KeywordParams(top_k=5))
    assert [kp.phrase for kp in phrases] == ["Hello"]


def test_no_content_terms_is_empty():
    assert score_keyphrases("12 34 !!", KeywordParams(top_k=3)) == []
    assert score_keyphrases("the of and is", KeywordParams(top_k=3)) == []


def test_dedup_drops_near_duplicates():
    # "word" vs "words" is 80% similar; at threshold 0.8 only one survives.
    text = "Strange word here. Strange words there."
    loose = score_keyphrases(text, KeywordParams(top_k=10, dedup_threshold=1.0))
    tight = score_keyphrases(text, KeywordParams(top_k=10, dedup_threshold=0.8))
    loose_names = {kp.phrase.lower() for kp in loose}
    tight_names = {kp.phrase.lower() for kp in tight}
    assert {"word", "words"} <= loose_names
    assert not {"word", "words"} <= tight_names


def test_params_validation():
    with pytest.raises(ValueError):
        KeywordParams(top_k=0)
    with pytest.raises(ValueError):
        KeywordParams(max_ngram=0)
    with pytest.raises(ValueError):
        KeywordParams(dedup_threshold=0.0)
