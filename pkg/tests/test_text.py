import re

from hypothesis import given, settings
from hypothesis import strategies as st

from dietmine.text import lemma_segments, lemmatize, split_words, tokenize
from oracles import tokens_by_chars

TOKEN_RE = re.compile(r"[a-z]{3,}")


def test_mcdonalds_tokens():
    text = "McDonald's - Premium Sweet Chili Chicken Wrap (Grilled)"
    assert tokenize(text) == ["mcdonald", "premium", "sweet", "chili", "chicken", "wrap", "grilled"]


def test_rules_drop_short_and_nonalpha():
    assert tokenize("2% milk, 1 cup") == ["milk", "cup"]
    assert tokenize("B12 vit_c oz tea") == ["tea"]
    assert tokenize("") == []


def test_split_words_keeps_everything():
    assert split_words("Oil - olive_2 x") == ["oil", "olive_2", "x"]


@settings(max_examples=300, deadline=None)
@given(st.text())
def test_tokens_always_lowercase_alpha(text):
    assert all(TOKEN_RE.fullmatch(t) for t in tokenize(text))


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from("abcXYZ019_ -'(),.é&"), max_size=60))
def test_tokenize_matches_char_oracle(text):
    assert tokenize(text) == tokens_by_chars(text)


def test_lemmatize_examples():
    cases = {
        "sprouts": "sprout", "beans": "bean", "berries": "berry", "glasses": "glass",
        "dishes": "dish", "boxes": "box", "peaches": "peach", "potatoes": "potato",
        "hummus": "hummus", "asparagus": "asparagus", "leaves": "leaf",
        "gas": "gas", "egg": "egg", "eggs": "egg", "cookies": "cookie", "Chips": "chip",
    }
    for word, lemma in cases.items():
        assert lemmatize(word) == lemma, word


@given(st.text(alphabet="abcehiosuxyz", max_size=12))
def test_lemmatize_idempotent(word):
    once = lemmatize(word)
    assert lemmatize(once) == once


def test_digit_tokens_break_segments():
    assert lemma_segments("bean 2 sprouts") == [("bean",), ("sprout",)]
    assert lemma_segments("Iga - bean sprouts") == [("iga", "bean", "sprout")]
