"""Three-level food taxonomy and entry annotation.

Taxonomy file: tab-separated ``main  sub  entity  [aliases]`` lines.  ``sub``
and ``entity`` may be empty to declare a bare category.  A category with no
children is itself matchable by name.  The optional fourth column holds
``|``-separated alternative surface forms for the node declared on that
line (e.g. ``grilled`` for the ``Grill`` preparation method).

An optional ``# counts: mains=N subs=N entities=N`` comment is checked
against what was loaded.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

from .corpus import UserDiary
from .text import lemma_segments

Path = tuple[str, ...]

_COUNTS = re.compile(r"#\s*counts:\s*(.*)$")


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    """A matchable taxonomy node surface form."""

    lemmas: tuple[str, ...]
    path: Path

    @property
    def main(self) -> str:
        return self.path[0]


@dataclass(frozen=True)
class Annotation:
    paths: frozenset[Path]

    def __bool__(self) -> bool:
        return bool(self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __contains__(self, path) -> bool:
        return tuple(path) in self.paths

    def leaves(self) -> frozenset[Path]:
        """Paths that are not a proper prefix of another path in the set."""
        return frozenset(
            p for p in self.paths
            if not any(len(q) > len(p) and q[: len(p)] == p for q in self.paths)
        )

    def names(self) -> list[str]:
        return sorted(path_name(p) for p in self.paths)


EMPTY = Annotation(frozenset())


def path_name(path: Path) -> str:
    return ":".join(path)


def ancestor_closure(paths: Iterable[Path]) -> frozenset[Path]:
    out = set()
    for p in paths:
        for i in range(1, len(p) + 1):
            out.add(p[:i])
    return frozenset(out)


class Taxonomy:
    """Main category -> subcategory -> entities, indexed for matching."""

    def __init__(self, tree: dict[str, dict[str, list[str]]], aliases: Mapping[Path, list[str]] | None = None):
        self.tree = tree
        self.aliases = dict(aliases or {})
        self.terms: list[Term] = []
        for path in self.leaf_paths():
            forms = [path[-1]] + self.aliases.get(path, [])
            seen = set()
            for form in forms:
                segs = lemma_segments(form)
                lemmas = tuple(t for s in segs for t in s)
                if not lemmas:
                    raise TaxonomyError(f"{path_name(path)}: form {form!r} has no alphabetic tokens")
                if lemmas not in seen:
                    seen.add(lemmas)
                    self.terms.append(Term(lemmas, path))
        self.index: dict[tuple[str, ...], list[Term]] = {}
        for term in self.terms:
            self.index.setdefault(term.lemmas, []).append(term)
        self.max_len = max((len(t.lemmas) for t in self.terms), default=0)

    @property
    def mains(self) -> list[str]:
        return list(self.tree)

    def n_subs(self) -> int:
        return sum(len(subs) for subs in self.tree.values())

    def n_entities(self) -> int:
        return sum(len(ents) for subs in self.tree.values() for ents in subs.values())

    def leaf_paths(self) -> list[Path]:
        out: list[Path] = []
        for main, subs in self.tree.items():
            if not subs:
                out.append((main,))
            for sub, ents in subs.items():
                if not ents:
                    out.append((main, sub))
                out.extend((main, sub, e) for e in ents)
        return out

    def all_paths(self) -> frozenset[Path]:
        return ancestor_closure(self.leaf_paths())

    def annotate(self, text: str) -> Annotation:
        return annotate(text, self)


def _check_name(name: str, lineno: int) -> str:
    if ":" in name or "|" in name:
        raise TaxonomyError(f"line {lineno}: name {name!r} may not contain ':' or '|'")
    return name


def parse_taxonomy(lines: Iterable[str]) -> Taxonomy:
    tree: dict[str, dict[str, list[str]]] = {}
    aliases: dict[Path, list[str]] = {}
    declared_counts: dict[str, int] | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            m = _COUNTS.match(line)
            if m:
                try:
                    declared_counts = {
                        k.strip(): int(v) for k, v in (kv.split("=") for kv in m.group(1).split())
                    }
                except ValueError:
                    raise TaxonomyError(f"line {lineno}: unreadable counts header") from None
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) > 4:
            raise TaxonomyError(f"line {lineno}: expected at most 4 fields, got {len(fields)}")
        fields += [""] * (4 - len(fields))
        main, sub, entity, alias_field = fields
        if not main:
            raise TaxonomyError(f"line {lineno}: empty main category")
        if entity and not sub:
            raise TaxonomyError(f"line {lineno}: entity {entity!r} has no subcategory (dangling parent)")
        subs = tree.setdefault(_check_name(main, lineno), {})
        if sub:
            ents = subs.setdefault(_check_name(sub, lineno), [])
            if entity:
                if entity in ents:
                    raise TaxonomyError(
                        f"line {lineno}: duplicate entity {entity!r} under {main}:{sub}"
                    )
                ents.append(_check_name(entity, lineno))
        path = tuple(x for x in (main, sub, entity) if x)
        if alias_field:
            aliases.setdefault(path, []).extend(a.strip() for a in alias_field.split("|") if a.strip())

    tax = Taxonomy(tree, aliases)
    leaves = set(tax.leaf_paths())
    for path in aliases:
        if path not in leaves:
            raise TaxonomyError(f"aliases given for non-leaf category {path_name(path)}")
    if declared_counts is not None:
        actual = {"mains": len(tree), "subs": tax.n_subs(), "entities": tax.n_entities()}
        for key, value in declared_counts.items():
            if key not in actual:
                raise TaxonomyError(f"unknown count {key!r} in counts header")
            if actual[key] != value:
                raise TaxonomyError(f"counts header says {key}={value}, loaded {actual[key]}")
    return tax


def load_taxonomy(path: str | os.PathLike) -> Taxonomy:
    with open(path, encoding="utf-8") as fh:
        return parse_taxonomy(fh)


def annotate(text: str, taxonomy: Taxonomy) -> Annotation:
    """Annotate one entry text with taxonomy category paths.

    Every taxonomy term whose lemma sequence occurs contiguously in the
    text is a candidate.  Within a main category, a candidate whose token
    span lies strictly inside another candidate's span is dropped.  Each
    survivor contributes its path and all ancestor paths.
    """
    found: dict[str, list[tuple[int, int, Term]]] = {}
    offset = 0
    for seg in lemma_segments(text):
        n = len(seg)
        for i in range(n):
            for length in range(1, min(taxonomy.max_len, n - i) + 1):
                for term in taxonomy.index.get(seg[i : i + length], ()):
                    found.setdefault(term.main, []).append((offset + i, offset + i + length, term))
        offset += n + 1

    survivors: list[Path] = []
    for spans in found.values():
        for a, b, term in spans:
            nested = any(
                c <= a and b <= d and (c, d) != (a, b) for c, d, _ in spans
            )
            if not nested:
                survivors.append(term.path)
    if not survivors:
        return EMPTY
    return Annotation(ancestor_closure(survivors))


def normalize_text(text: str) -> str:
    return " ".join(text.split())


def unique_texts(corpus: Iterable[UserDiary]) -> list[str]:
    texts = {e.text for d in corpus for day in d.days for e in day.entries}
    return sorted(texts)


def annotate_corpus(corpus: Iterable[UserDiary], taxonomy: Taxonomy, jobs: int = 1) -> dict[str, Annotation]:
    """Annotation of every distinct entry text in the corpus."""
    texts = unique_texts(corpus)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda t: annotate(t, taxonomy), texts))
    else:
        results = [annotate(t, taxonomy) for t in texts]
    return dict(zip(texts, results))


@dataclass(frozen=True)
class Coverage:
    unique_texts: int
    annotated: int

    @property
    def fraction(self) -> float:
        return self.annotated / self.unique_texts if self.unique_texts else 0.0


def coverage_report(corpus: Iterable[UserDiary], taxonomy: Taxonomy) -> Coverage:
    """Share of distinct (whitespace-normalized) entry texts with a non-empty annotation."""
    texts = {normalize_text(t) for t in unique_texts(corpus)}
    annotated = sum(1 for t in texts if annotate(t, taxonomy))
    return Coverage(len(texts), annotated)
