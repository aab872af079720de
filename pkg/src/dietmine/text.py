"""Tokenizers and the rule-based singularizing lemmatizer."""

from __future__ import annotations

import re
from functools import lru_cache

# ASCII word characters only; "é" and friends split words.
NON_WORD = re.compile(r"[^a-zA-Z0-9_]+")
ALPHA = re.compile(r"[a-z]+")

MIN_TOKEN_LENGTH = 3

IRREGULARS = {
    "leaves": "leaf",
    "loaves": "loaf",
    "halves": "half",
    "knives": "knife",
    "calves": "calf",
    "wolves": "wolf",
    "potatoes": "potato",
    "tomatoes": "tomato",
    "mangoes": "mango",
    "avocadoes": "avocado",
    "heroes": "hero",
    "cookies": "cookie",
    "brownies": "brownie",
    "smoothies": "smoothie",
    "veggies": "veggie",
    "pies": "pie",
    "ties": "tie",
    "calories": "calorie",
    "children": "child",
    "women": "woman",
    "geese": "goose",
    "teeth": "tooth",
    "feet": "foot",
    "mice": "mouse",
    "oxen": "ox",
}

# Singular nouns ending in -s that the suffix rules would mangle.
_KEEP_SUFFIXES = ("ss", "us", "is")


def _singularize_once(token: str) -> str:
    if len(token) <= 3:
        return token
    if token in IRREGULARS:
        return IRREGULARS[token]
    if token.endswith(_KEEP_SUFFIXES):
        return token
    if token.endswith("ies"):
        return token[:-3] + "y"
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("es") and token[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return token[:-2]
    if token.endswith("s"):
        return token[:-1]
    return token


@lru_cache(maxsize=65536)
def lemmatize(token: str) -> str:
    """Lowercase and singularize ``token``.

    Suffix rules: ``-ies -> -y``, ``-sses -> -ss``, ``-es -> ''`` after
    s/x/z/ch/sh, ``-s -> ''`` otherwise; tokens of length <= 3 are left
    alone and a small irregulars table is consulted first.  The single-step
    rule is applied until it reaches a fixed point, which makes the
    function idempotent by construction.

    >>> lemmatize("sprouts"), lemmatize("berries"), lemmatize("rice")
    ('sprout', 'berry', 'rice')
    """
    current = token.lower()
    while True:
        nxt = _singularize_once(current)
        if nxt == current:
            return current
        current = nxt


def split_words(text: str) -> list[str]:
    """Split on non-word characters and lowercase; no filtering."""
    return [t.lower() for t in NON_WORD.split(text) if t]


def tokenize(text: str) -> list[str]:
    """Feature tokenizer: lowercase alphabetic tokens of length >= 3, in order.

    >>> tokenize("100% Whole-Wheat")
    ['whole', 'wheat']
    """
    return [
        t for t in split_words(text) if len(t) >= MIN_TOKEN_LENGTH and ALPHA.fullmatch(t)
    ]


def lemma_segments(text: str) -> list[tuple[str, ...]]:
    """Annotation tokenizer.

    Returns runs of lemmatized alphabetic tokens.  Short tokens are kept;
    a token containing a digit or underscore ends the current run, so a
    taxonomy match can never span it.
    """
    segments: list[tuple[str, ...]] = []
    run: list[str] = []
    for word in split_words(text):
        if ALPHA.fullmatch(word):
            run.append(lemmatize(word))
        elif run:
            segments.append(tuple(run))
            run = []
    if run:
        segments.append(tuple(run))
    return segments
