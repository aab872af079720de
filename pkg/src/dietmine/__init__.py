"""Mining food diaries for what separates users who overshoot their calorie goal."""

from .corpus import DayRecord, FoodEntry, UserDiary, corpus_stats, load_corpus, loads_corpus
from .labeling import DayLabel, LabelPolicy, label_day, label_user
from .taxonomy import Annotation, Taxonomy, annotate, load_taxonomy, parse_taxonomy
from .text import lemmatize, tokenize

__version__ = "0.1.0"

__all__ = [
    "Annotation", "DayLabel", "DayRecord", "FoodEntry", "LabelPolicy", "Taxonomy", "UserDiary",
    "annotate", "corpus_stats", "label_day", "label_user", "lemmatize", "load_corpus",
    "load_taxonomy", "loads_corpus", "parse_taxonomy", "tokenize",
]
