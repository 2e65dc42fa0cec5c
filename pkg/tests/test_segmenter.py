from __future__ import annotations

from forge.segmenter import split_sentences


def test_basic_split_with_spans():
    text = "A b. C d. E f."
    sentences = split_sentences(text)
    assert [s.text for s in sentences] == ["A b.", "C d.", "E f."]
    for s in sentences:
        assert text[s.start : s.end] == s.text


def test_abbreviations_do_not_split():
    text = "Dr. Smith met Mr. Jones at 5 p.m. sharp. They talked."
    assert [s.text for s in split_sentences(text)] == [
        "Dr. Smith met Mr. Jones at 5 p.m. sharp.",
        "They talked.",
    ]


def test_single_uppercase_initial_protected():
    text = "J. K. Rowling wrote it. Everyone read it."
    assert len(split_sentences(text)) == 2


def test_lowercase_requires_no_split():
    # terminator followed by lowercase is not a boundary
    text = "see the notes. they matter."
    assert [s.text for s in split_sentences(text)] == ["see the notes. they matter."]


def test_decimal_numbers_do_not_split():
    text = "Pi is 3.14 roughly. Yes."
    assert [s.text for s in split_sentences(text)] == ["Pi is 3.14 roughly.", "Yes."]


def test_terminators_question_exclamation():
    text = "Really?! Indeed. Go now!"
    assert [s.text for s in split_sentences(text)] == ["Really?!", "Indeed.", "Go now!"]


def test_closing_quote_after_terminator():
    text = 'He said "Go." Then he left.'
    sentences = split_sentences(text)
    assert [s.text for s in sentences] == ['He said "Go."', "Then he left."]


def test_no_terminator_is_one_sentence():
    text = "  just a fragment without end  "
    sentences = split_sentences(text)
    assert len(sentences) == 1
    assert sentences[0].text == "just a fragment without end"
    assert text[sentences[0].start : sentences[0].end] == sentences[0].text


def test_whitespace_only_is_empty():
    assert split_sentences("   \n\t ") == []
