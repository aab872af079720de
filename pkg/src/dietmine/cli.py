"""Command-line front end: ``dietmine <command> [options]``.

Every command reads one INI run config (``--config``), applies flag
overrides, writes its artifacts into ``--out`` and records a
``manifest-<command>.json`` with the resolved config, seeds and SHA-256
digests of inputs and outputs.  Downstream commands read upstream
artifacts from the output directory and refuse to run if those no longer
match the digests their producer recorded.

Stage seeds are derived from the master seed as the first 8 bytes
(big-endian) of ``sha256("<seed>:<stage>")``.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import os
import re
import shutil
import sys
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from . import cluster as clu
from . import features as feat
from . import labeling as lab
from . import learn
from . import plots
from . import synth
from .corpus import CorpusError, corpus_stats, load_corpus
from .taxonomy import TaxonomyError, annotate_corpus, coverage_report, load_taxonomy, path_name

COMMANDS = (
    "stats", "annotate", "featurize", "label", "train", "evaluate",
    "features-report", "cluster", "profile", "synth",
)
PIPELINE = (
    "stats", "annotate", "featurize", "label", "train", "evaluate",
    "features-report", "profile", "cluster",
)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    pass


def sub_seed(master: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def packaged_taxonomy() -> str:
    return str(resources.files("dietmine").joinpath("data/taxonomy.tsv"))


# -- configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    corpus: str | None = None
    taxonomy: str | None = None
    synth_spec: str | None = None
    out: str = "out"
    space: str = feat.TOKEN
    seed: int | None = None
    support: int = feat.DEFAULT_SUPPORT
    min_days: int = feat.DEFAULT_MIN_DAYS
    min_kcal: int = feat.DEFAULT_MIN_DAY_KCAL
    below_margin: float = 0.2
    symmetric: bool = False
    C: float | None = None
    folds: int = 10
    normalize: bool = False
    balance: bool = True
    max_epochs: int = 2000
    k_min: int = 2
    k_max: int = 10
    rank_cap: int = 40
    top: int = 10
    top_k: int = 10
    buckets: int = 10
    groups: int = 20
    aggregate: str = "modal"

    @property
    def master_seed(self) -> int:
        return self.seed if self.seed is not None else 0

    @property
    def policy(self) -> lab.LabelPolicy:
        return lab.LabelPolicy(self.below_margin, self.symmetric, self.min_kcal)

    def taxonomy_path(self) -> str:
        return self.taxonomy or packaged_taxonomy()

    def record(self) -> dict:
        """Config as stored in manifests: paths reduced to file names, output dir omitted."""
        out = dataclasses.asdict(self)
        del out["out"]
        for key in ("corpus", "taxonomy", "synth_spec"):
            if out[key] is not None:
                out[key] = os.path.basename(out[key])
        return out


def _positive_int(lo: int) -> Callable[[str], int]:
    def conv(raw: str) -> int:
        v = int(raw)
        if v < lo:
            raise ValueError(f"must be an integer >= {lo}")
        return v
    return conv


def _seed(raw: str) -> int:
    v = int(raw)
    if not 0 <= v < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _margin(raw: str) -> float:
    v = float(raw)
    if not 0 < v < 1:
        raise ValueError("must lie strictly between 0 and 1")
    return v


def _C(raw: str) -> float | None:
    if raw.strip().lower() in ("auto", ""):
        return None
    v = float(raw)
    if not v > 0:
        raise ValueError("must be > 0 or 'auto'")
    return v


def _choice(*options: str) -> Callable[[str], str]:
    def conv(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return raw
    return conv


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


# (section, key in file) -> (RunConfig attribute, converter); None marks a path
FIELDS: dict[tuple[str, str], tuple[str, Callable[[str], object] | None]] = {
    ("run", "corpus"): ("corpus", None),
    ("run", "taxonomy"): ("taxonomy", None),
    ("run", "synth_spec"): ("synth_spec", None),
    ("run", "out"): ("out", None),
    ("run", "space"): ("space", _choice(*feat.SPACES)),
    ("run", "seed"): ("seed", _seed),
    ("thresholds", "support"): ("support", _positive_int(0)),
    ("thresholds", "min_days"): ("min_days", _positive_int(1)),
    ("thresholds", "min_kcal"): ("min_kcal", _positive_int(0)),
    ("thresholds", "below_margin"): ("below_margin", _margin),
    ("thresholds", "symmetric"): ("symmetric", _bool),
    ("svm", "c"): ("C", _C),
    ("svm", "folds"): ("folds", _positive_int(2)),
    ("svm", "normalize"): ("normalize", _bool),
    ("svm", "balance"): ("balance", _bool),
    ("svm", "max_epochs"): ("max_epochs", _positive_int(1)),
    ("cluster", "k_min"): ("k_min", _positive_int(1)),
    ("cluster", "k_max"): ("k_max", _positive_int(1)),
    ("cluster", "rank_cap"): ("rank_cap", _positive_int(1)),
    ("cluster", "top"): ("top", _positive_int(1)),
    ("report", "top_k"): ("top_k", _positive_int(1)),
    ("report", "buckets"): ("buckets", _positive_int(1)),
    ("report", "groups"): ("groups", _positive_int(1)),
    ("report", "aggregate"): ("aggregate", _choice("modal", "macro")),
}
ATTR_CONVERTERS = {attr: conv for attr, conv in FIELDS.values()}


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*=", line, re.IGNORECASE):
            return i
    return None


def load_config(path: str) -> RunConfig:
    """Parse an INI run config; relative paths resolve against the config's directory."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), delimiters=("=",))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    cfg = RunConfig()
    base = os.path.dirname(os.path.abspath(path))
    for section in parser.sections():
        for key, raw in parser[section].items():
            spec = FIELDS.get((section.lower(), key))
            where = f"{path}:{_line_of(text, section.lower(), key) or '?'}: [{section}] {key}"
            if spec is None:
                raise ConfigError(f"{where}: unknown field")
            attr, conv = spec
            if conv is None:
                value: object = os.path.normpath(os.path.join(base, raw.strip()))
            else:
                try:
                    value = conv(raw.strip())
                except ValueError as exc:
                    msg = str(exc) if "must" in str(exc) else f"bad value {raw.strip()!r}"
                    raise ConfigError(f"{where}: {msg}") from None
            setattr(cfg, attr, value)
    return cfg


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    for attr in (f.name for f in dataclasses.fields(RunConfig)):
        raw = getattr(args, attr, None)
        if raw is None:
            continue
        conv = ATTR_CONVERTERS.get(attr)
        if conv is None or isinstance(raw, bool):
            setattr(cfg, attr, os.path.abspath(raw) if isinstance(raw, str) else raw)
            continue
        try:
            setattr(cfg, attr, conv(str(raw)))
        except ValueError as exc:
            raise ConfigError(f"--{attr.replace('_', '-')}: {exc}") from None
    return cfg


def check_config(cfg: RunConfig, command: str) -> None:
    if cfg.k_min > cfg.k_max:
        raise ConfigError(f"[cluster] k_min={cfg.k_min} exceeds k_max={cfg.k_max}")
    if cfg.taxonomy and not os.path.isfile(cfg.taxonomy):
        raise ConfigError(f"[run] taxonomy: no such file {cfg.taxonomy}")
    if command == "synth":
        if not cfg.synth_spec:
            raise ConfigError("synth needs [run] synth_spec or --spec")
        if not os.path.isfile(cfg.synth_spec):
            raise ConfigError(f"[run] synth_spec: no such file {cfg.synth_spec}")
    elif command in ("stats", "annotate", "featurize", "label", "features-report"):
        if not cfg.corpus:
            raise ConfigError(f"{command} needs [run] corpus or --corpus")
        if not os.path.isfile(cfg.corpus):
            raise ConfigError(f"[run] corpus: no such file {cfg.corpus}")


# -- stage bookkeeping ------------------------------------------------------


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def read_manifests(out_dir: str) -> dict[str, dict]:
    found = {}
    if os.path.isdir(out_dir):
        for name in sorted(os.listdir(out_dir)):
            if name.startswith("manifest-") and name.endswith(".json"):
                with open(os.path.join(out_dir, name), encoding="utf-8") as fh:
                    found[name] = json.load(fh)
    return found


class Stage:
    """Collects one command's outputs in a staging directory until success."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = cfg.out
        os.makedirs(self.out, exist_ok=True)
        self.staging = os.path.join(self.out, f".staging-{command}")
        shutil.rmtree(self.staging, ignore_errors=True)
        os.makedirs(self.staging)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.seeds: dict[str, int] = {}

    def seed(self, stage: str) -> int:
        self.seeds[stage] = sub_seed(self.cfg.master_seed, stage)
        return self.seeds[stage]

    def source(self, path: str) -> str:
        """Record an external input file."""
        self.inputs[os.path.basename(path)] = file_digest(path)
        return path

    def artifact(self, name: str) -> str:
        """An upstream artifact in the output directory, checked against its producer's manifest."""
        path = os.path.join(self.out, name)
        if not os.path.isfile(path):
            raise StageError(f"missing {name} in {self.out}; run the producing command first")
        digest = file_digest(path)
        for mname, manifest in read_manifests(self.out).items():
            recorded = manifest.get("outputs", {}).get(name)
            if recorded is not None and recorded != digest:
                raise StageError(f"{name} changed since {mname} was written")
        self.inputs[name] = digest
        return path

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.staging, name)

    def open(self, name: str):
        return open(self.path(name), "w", encoding="utf-8", newline="\n")

    def commit(self) -> dict:
        digests = {}
        for name in self.outputs:
            final = os.path.join(self.out, name)
            os.replace(os.path.join(self.staging, name), final)
            digests[name] = file_digest(final)
        manifest = {
            "command": self.command,
            "config": self.cfg.record(),
            "seed": self.cfg.master_seed,
            "sub_seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": digests,
        }
        with open(os.path.join(self.out, f"manifest-{self.command}.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        shutil.rmtree(self.staging, ignore_errors=True)
        return manifest

    def abort(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)


# -- shared loading ---------------------------------------------------------


def _corpus(stage: Stage):
    return load_corpus(stage.source(stage.cfg.corpus))


def _extractor(stage: Stage, corpus, jobs: int) -> feat.FeatureExtractor:
    if stage.cfg.space == feat.TOKEN:
        return feat.FeatureExtractor(feat.TOKEN)
    taxonomy = load_taxonomy(stage.source(stage.cfg.taxonomy_path()))
    return feat.FeatureExtractor(feat.CATEGORY, annotate_corpus(corpus, taxonomy, jobs))


def _vocabulary(stage: Stage) -> feat.FeatureVocabulary:
    with open(stage.artifact("vocabulary.tsv"), encoding="utf-8") as fh:
        return feat.load_vocabulary(fh, stage.cfg.space)


def _vectors(stage: Stage, normalized: bool) -> list[feat.FeatureVector]:
    name = "vectors_normalized.tsv" if normalized else "vectors.tsv"
    with open(stage.artifact(name), encoding="utf-8") as fh:
        return feat.load_vectors(fh, stage.cfg.space, normalized)


def _user_labels(stage: Stage) -> dict[str, lab.UserLabel]:
    with open(stage.artifact("user_labels.tsv"), encoding="utf-8") as fh:
        return lab.load_user_labels(fh)


def _sample(stage: Stage, vocab: feat.FeatureVocabulary) -> learn.Sample:
    sample = learn.build_sample(_vectors(stage, stage.cfg.normalize), _user_labels(stage), len(vocab))
    if stage.cfg.balance:
        sample = learn.balance(sample, stage.seed("balance"))
    return sample


def _model(stage: Stage, names: list[str] | None = None) -> learn.LinearModel:
    with open(stage.artifact("model.tsv"), encoding="utf-8") as fh:
        return learn.LinearModel.load(fh, names)


# -- commands ---------------------------------------------------------------


def cmd_stats(stage: Stage, jobs: int) -> None:
    stats = corpus_stats(_corpus(stage))
    with stage.open("stats.tsv") as fh:
        fh.write("statistic\tvalue\n")
        for k, v in stats.as_rows():
            fh.write(f"{k}\t{v}\n")


def cmd_annotate(stage: Stage, jobs: int) -> None:
    corpus = _corpus(stage)
    taxonomy = load_taxonomy(stage.source(stage.cfg.taxonomy_path()))
    annotations = annotate_corpus(corpus, taxonomy, jobs)
    with stage.open("annotations.tsv") as fh:
        fh.write("entry_text\tcategories\n")
        for text in sorted(annotations):
            names = sorted(path_name(p) for p in annotations[text].leaves())
            fh.write(f"{text}\t{'|'.join(names)}\n")
    cov = coverage_report(corpus, taxonomy)
    with stage.open("coverage.tsv") as fh:
        fh.write("unique_texts\tannotated\tfraction\n")
        fh.write(f"{cov.unique_texts}\t{cov.annotated}\t{cov.fraction:.4f}\n")


def cmd_featurize(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    corpus = _corpus(stage)
    extractor = _extractor(stage, corpus, jobs)
    vocab = feat.build_vocabulary(corpus, extractor, cfg.support)
    keep = set(feat.eligible_users(corpus, vocab, extractor, cfg.min_days, cfg.min_kcal))
    vectors = [feat.featurize(d, vocab, extractor, cfg.min_kcal) for d in corpus if d.user_id in keep]
    with stage.open("vocabulary.tsv") as fh:
        vocab.dump(fh)
    with stage.open("vectors.tsv") as fh:
        feat.dump_vectors(vectors, fh)
    with stage.open("vectors_normalized.tsv") as fh:
        feat.dump_vectors((feat.normalize(v) for v in vectors), fh)


def cmd_label(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    corpus = _corpus(stage)
    user_days = [lab.label_days(d, cfg.policy) for d in corpus]
    labels = [
        lab.label_user_days(d.user_id, days, cfg.policy) for d, days in zip(corpus, user_days) if days
    ]
    with stage.open("labeled_days.tsv") as fh:
        lab.dump_labeled_days((x for days in user_days for x in days), fh)
    with stage.open("user_labels.tsv") as fh:
        lab.dump_user_labels(labels, fh)
    counts = lab.class_counts(labels)
    with stage.open("class_counts.tsv") as fh:
        fh.write("below\ton_target\tabove\tabove_vs_below\n")
        fh.write(f"{counts.below}\t{counts.on_target}\t{counts.above}\t{counts.above_vs_below}\n")
    trend = lab.weekly_trend(x for days in user_days for x in days)
    with stage.open("weekly_trend.tsv") as fh:
        lab.write_weekly_trend(trend, fh)
    plots.plot_weekly_trend(trend, stage.path("weekly_trend.png"))
    buckets = lab.lifetime_buckets(user_days, cfg.buckets, cfg.aggregate, cfg.policy)
    with stage.open("lifetime_buckets.tsv") as fh:
        lab.write_buckets(buckets, fh)
    plots.plot_buckets(buckets, stage.path("lifetime_buckets.png"))


def cmd_train(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    vocab = _vocabulary(stage)
    sample = _sample(stage, vocab)
    model = learn.train(
        sample, C=cfg.C, seed=stage.seed("train"), feature_names=vocab.names,
        max_epochs=cfg.max_epochs, space=cfg.space, normalized=cfg.normalize,
    )
    with stage.open("model.tsv") as fh:
        model.dump(fh)
    with stage.open("training_sample.tsv") as fh:
        fh.write("user_id\tclass\n")
        for uid, y in zip(sample.user_ids, sample.y):
            fh.write(f"{uid}\t{'above' if y > 0 else 'below'}\n")


def cmd_evaluate(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    sample = _sample(stage, _vocabulary(stage))
    report = learn.cross_validate(
        sample, folds=cfg.folds, C=cfg.C, seed=stage.seed("folds"), jobs=jobs,
        max_epochs=cfg.max_epochs,
    )
    with stage.open("evaluation.tsv") as fh:
        report.dump(fh)


def cmd_features_report(stage: Stage, jobs: int) -> None:
    model = _model(stage)
    corpus = _corpus(stage)
    extractor = _extractor(stage, corpus, jobs)
    examples = learn.example_foods(corpus, extractor, model.feature_names)
    pos, neg = learn.top_features(model, stage.cfg.top_k, examples)
    with stage.open("top_features.tsv") as fh:
        learn.write_top_features(pos, neg, fh)


def cmd_profile(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    vocab = _vocabulary(stage)
    model = _model(stage, vocab.names)
    labels = _user_labels(stage)
    sample = learn.build_sample(_vectors(stage, model.normalized), labels, len(vocab))
    with open(stage.artifact("labeled_days.tsv"), encoding="utf-8") as fh:
        user_days = lab.load_labeled_days(fh)
    profile = learn.margin_profile(model, sample, user_days, cfg.groups)
    with stage.open("margin_profile.tsv") as fh:
        profile.dump(fh)
    with stage.open("margin_scores.tsv") as fh:
        fh.write("user_id\tsigned_distance\tlabel\n")
        for uid, score in profile.scores:
            fh.write(f"{uid}\t{score:.6f}\t{labels[uid].label.value}\n")
    with stage.open("error_extremes.tsv") as fh:
        fh.write("case\tuser_id\tscore\tlabel\tmodal_fraction\n")
        for name, case in learn.error_extremes(model, sample, labels).items():
            if case is None:
                fh.write(f"{name}\t\t\t\t\n")
            else:
                fh.write(f"{name}\t{case.user_id}\t{case.score:.6f}\t{case.label.value}\t{case.modal_fraction:.4f}\n")
    plots.plot_margin_profile(profile, stage.path("margin_profile.png"))


def cmd_cluster(stage: Stage, jobs: int) -> None:
    cfg = stage.cfg
    vocab = _vocabulary(stage)
    vectors = _vectors(stage, True)
    labels = _user_labels(stage)
    X = np.zeros((len(vectors), len(vocab)))
    for i, v in enumerate(vectors):
        for k, val in v.values.items():
            X[i, k] = val
    user_ids = [v.user_id for v in vectors]
    trace: list[clu.SplitDecision] = []
    model = clu.xmeans(X, cfg.k_min, cfg.k_max, seed=stage.seed("cluster"), trace=trace)
    with stage.open("clusters.tsv") as fh:
        fh.write("user_id\tcluster\n")
        for uid, c in zip(user_ids, model.assignment):
            fh.write(f"{uid}\t{int(c) + 1}\n")
    gains = clu.rank_gains(model, X, vocab.names, cfg.rank_cap, cfg.top)
    with stage.open("cluster_report.tsv") as fh:
        clu.write_cluster_report(clu.cluster_composition(model, user_ids, labels), gains, fh)
    with stage.open("cluster_trace.tsv") as fh:
        fh.write("round\tcluster\tsize\tparent_bic\tchild_bic\taccepted\n")
        for t in trace:
            fh.write(f"{t.round}\t{t.cluster + 1}\t{t.size}\t{t.parent_bic:.6f}\t{t.child_bic:.6f}\t{str(t.accepted).lower()}\n")


def cmd_synth(stage: Stage, jobs: int) -> None:
    spec = synth.load_synth_spec(stage.source(stage.cfg.synth_spec))
    if stage.cfg.seed is not None:
        spec.seed = stage.cfg.seed
    text, truth = synth.generate_text(spec)
    with stage.open("corpus.tsv") as fh:
        fh.write(text)
    with stage.open("ground_truth.tsv") as fh:
        truth.dump(fh)


HANDLERS: dict[str, Callable[[Stage, int], None]] = {
    "stats": cmd_stats,
    "annotate": cmd_annotate,
    "featurize": cmd_featurize,
    "label": cmd_label,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "features-report": cmd_features_report,
    "cluster": cmd_cluster,
    "profile": cmd_profile,
    "synth": cmd_synth,
}


def run(command: str, cfg: RunConfig, jobs: int = 1) -> dict:
    """Run one command; returns its manifest.  Nothing is left behind on failure."""
    check_config(cfg, command)
    stage = Stage(cfg, command)
    try:
        HANDLERS[command](stage, jobs)
        return stage.commit()
    except BaseException:
        stage.abort()
        raise


def run_pipeline(cfg: RunConfig, jobs: int = 1) -> list[dict]:
    manifests = []
    if cfg.synth_spec and not cfg.corpus:
        manifests.append(run("synth", cfg, jobs))
        cfg.corpus = os.path.join(cfg.out, "corpus.tsv")
    for command in PIPELINE:
        manifests.append(run(command, cfg, jobs))
    return manifests


def verify(out_dir: str) -> list[str]:
    """Problems found re-hashing every manifest's outputs and in-directory inputs."""
    problems = []
    for mname, manifest in read_manifests(out_dir).items():
        for kind in ("outputs", "inputs"):
            for name, digest in manifest.get(kind, {}).items():
                path = os.path.join(out_dir, name)
                if not os.path.isfile(path):
                    if kind == "outputs":
                        problems.append(f"{mname}: missing output {name}")
                    continue
                if file_digest(path) != digest:
                    problems.append(f"{mname}: {kind[:-1]} {name} digest mismatch")
    return problems


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run")
    g.add_argument("--config", help="INI run config")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", help="master seed (unsigned 64-bit)")
    g.add_argument("--jobs", type=int, default=1, help="worker threads within a stage")
    g.add_argument("--corpus", help="diary corpus TSV")
    g.add_argument("--taxonomy", help="taxonomy TSV (default: bundled)")
    g.add_argument("--spec", dest="synth_spec", help="synthetic corpus spec (INI)")
    g.add_argument("--space", help="feature space: token or category")
    t = common.add_argument_group("thresholds")
    t.add_argument("--support", help="minimum distinct users per feature (exclusive)")
    t.add_argument("--min-days", dest="min_days", help="minimum qualifying days per user")
    t.add_argument("--min-kcal", dest="min_kcal", help="minimum kcal for a day to count")
    t.add_argument("--below-margin", dest="below_margin", help="fraction under goal for below")
    t.add_argument("--symmetric", action=argparse.BooleanOptionalAction, default=None,
                   help="also require the margin above goal for above")
    s = common.add_argument_group("svm")
    s.add_argument("--C", dest="C", help="regularization constant or 'auto'")
    s.add_argument("--folds", help="cross-validation folds")
    s.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="train on unit-normalized vectors")
    s.add_argument("--balance", action=argparse.BooleanOptionalAction, default=None,
                   help="downsample the majority class")
    s.add_argument("--max-epochs", dest="max_epochs")
    c = common.add_argument_group("cluster and reports")
    c.add_argument("--k-min", dest="k_min")
    c.add_argument("--k-max", dest="k_max")
    c.add_argument("--rank-cap", dest="rank_cap")
    c.add_argument("--top", help="rank-gain tokens listed per cluster")
    c.add_argument("--top-k", dest="top_k", help="features listed per class")
    c.add_argument("--buckets", help="lifetime buckets")
    c.add_argument("--groups", help="margin-profile groups")
    c.add_argument("--aggregate", help="lifetime aggregation: modal or macro")

    parser = argparse.ArgumentParser(prog="dietmine", description="Food-diary mining pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("pipeline", parents=[common], help="synth (if configured) then every stage in order")
    v = sub.add_parser("verify", help="re-check manifest digests in an output directory")
    v.add_argument("--out", required=True)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args)
    cfg.out = os.path.abspath(cfg.out)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        problems = verify(args.out)
        for p in problems:
            print(p, file=sys.stderr)
        print("ok" if not problems else f"{len(problems)} problem(s)")
        return 1 if problems else 0
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs: must be >= 1")
        cfg = resolve_config(args)
        if args.command == "pipeline":
            manifests = run_pipeline(cfg, args.jobs)
        else:
            manifests = [run(args.command, cfg, args.jobs)]
    except ConfigError as exc:
        print(f"dietmine: config error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, TaxonomyError, lab.LabelError, learn.LearnError, clu.ClusterError,
            synth.SynthError, StageError, OSError, ValueError) as exc:
        print(f"dietmine {args.command}: {exc}", file=sys.stderr)
        return 1
    for m in manifests:
        print(f"{m['command']}: " + " ".join(sorted(m["outputs"])))
    return 0


if __name__ == "__main__":
    sys.exit(main())
