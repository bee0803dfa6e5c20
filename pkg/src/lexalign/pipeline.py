"""Declarative end-to-end runs: dictionary preparation, alignment, evaluation,
and a manifest that pins configuration and input hashes.

A run is deterministic: the same configuration over the same inputs writes
byte-identical artifacts. While a run is in flight an INCOMPLETE marker file
sits in the output directory; it is removed only after the manifest is
written, so partial output is always recognizable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .align import (AlignedSpace, MultiSpace, align_multistep, align_orthogonal,
                    meemi_bilingual, meemi_multilingual)
from .dictionary import (DictionaryPairs, clean_dictionary, load_dictionary,
                         split_dictionary, transpose)
from .embeddings import DEFAULT_NORMALIZE, NORM_STEPS, load_embeddings, normalize, save_embeddings
from .errors import DataError, PipelineStageError
from .induction import precision_at_k, render_report
from .maps import save_maps

logger = logging.getLogger(__name__)

METHODS = ("orthogonal", "multistep", "meemi", "meemi-multi")
DICT_DIRECTIONS = ("ref2other", "other2ref")
STAGES = ("dict", "align", "eval")
INCOMPLETE_MARKER = "INCOMPLETE"


@dataclass
class PipelineConfig:
    """Validated run configuration; build one with from_dict."""

    reference: dict
    targets: list
    out_dir: str
    method: str = "orthogonal"
    normalize: tuple = DEFAULT_NORMALIZE
    reweight_p: float = 0.5
    reduce_dim: int | None = None
    sources: list = field(default_factory=list)
    split: dict | None = None
    eval: dict | None = None
    seed: int | None = None
    lowercase: bool = False
    max_words: int | None = None
    clean_dicts: bool = True

    _KEYS = ("reference", "targets", "out_dir", "method", "normalize", "reweight_p",
             "reduce_dim", "sources", "split", "eval", "seed", "lowercase",
             "max_words", "clean_dicts")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        unknown = set(raw) - set(cls._KEYS)
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        for key in ("reference", "targets", "out_dir"):
            if key not in raw:
                raise DataError(f"config is missing required key {key!r}")

        reference = dict(raw["reference"])
        if set(reference) - {"lang", "path"} or not {"lang", "path"} <= set(reference):
            raise DataError("reference must have exactly the keys lang and path")

        targets = []
        if not raw["targets"]:
            raise DataError("targets must be a non-empty list")
        for entry in raw["targets"]:
            entry = dict(entry)
            extra = set(entry) - {"lang", "path", "dict", "dict_direction"}
            if extra or not {"lang", "path", "dict"} <= set(entry):
                raise DataError(f"target entry needs lang, path, dict "
                                f"(optional dict_direction); got {sorted(entry)}")
            entry.setdefault("dict_direction", "ref2other")
            if entry["dict_direction"] not in DICT_DIRECTIONS:
                raise DataError(f"dict_direction must be one of {DICT_DIRECTIONS}")
            if entry["lang"] == reference["lang"]:
                raise DataError("a target repeats the reference language")
            targets.append(entry)
        if len({t["lang"] for t in targets}) != len(targets):
            raise DataError("duplicate target languages")

        method = raw.get("method", "orthogonal")
        if method not in METHODS:
            raise DataError(f"method must be one of {METHODS}, got {method!r}")
        if method in ("multistep", "meemi") and len(targets) > 1:
            raise DataError(f"method {method!r} aligns one language pair per run; "
                            f"use meemi-multi for several targets")

        steps = tuple(raw.get("normalize", DEFAULT_NORMALIZE))
        bad = [s for s in steps if s not in NORM_STEPS]
        if bad:
            raise DataError(f"unknown normalization steps {bad}")

        reweight_p = float(raw.get("reweight_p", 0.5))
        if reweight_p < 0.0:
            raise DataError("reweight_p must be >= 0")
        reduce_dim = raw.get("reduce_dim")
        if reduce_dim is not None:
            reduce_dim = int(reduce_dim)
            if reduce_dim < 1:
                raise DataError("reduce_dim must be positive")

        seed = raw.get("seed")
        split = raw.get("split")
        if split is not None:
            split = dict(split)
            if set(split) - {"test_size", "seed"} or "test_size" not in split:
                raise DataError("split needs test_size (optional seed)")
            if int(split["test_size"]) < 1:
                raise DataError("split test_size must be positive")
            split["test_size"] = int(split["test_size"])
            if split.get("seed") is None:
                if seed is None:
                    raise DataError("a split is configured but no seed is given")
                split["seed"] = seed
            split["seed"] = int(split["seed"])

        evaluation = raw.get("eval")
        if evaluation is not None:
            evaluation = dict(evaluation)
            extra = set(evaluation) - {"test", "ks", "oov_policy", "label"}
            if extra:
                raise DataError(f"unknown eval keys: {sorted(extra)}")
            evaluation.setdefault("test", None)
            evaluation.setdefault("ks", [1, 5, 10])
            evaluation.setdefault("oov_policy", "skip")
            evaluation.setdefault("label", method)
            evaluation["ks"] = sorted({int(k) for k in evaluation["ks"]})
            if not evaluation["ks"] or evaluation["ks"][0] < 1:
                raise DataError("eval ks must be positive integers")
            if evaluation["oov_policy"] not in ("skip", "fail"):
                raise DataError("eval oov_policy must be 'skip' or 'fail'")
            if evaluation["test"] is None and split is None:
                raise DataError("eval needs either a test dictionary or a split")

        sources = list(raw.get("sources") or [])
        if method == "meemi-multi":
            known = {reference["lang"], *(t["lang"] for t in targets)}
            bad = set(sources) - known
            if bad:
                raise DataError(f"sources name unknown languages: {sorted(bad)}")
            sources = sorted(set(sources) | {reference["lang"]})
        elif sources:
            raise DataError("sources only applies to method meemi-multi")

        max_words = raw.get("max_words")
        if max_words is not None and int(max_words) < 1:
            raise DataError("max_words must be positive")

        return cls(reference=reference, targets=targets, out_dir=str(raw["out_dir"]),
                   method=method, normalize=steps, reweight_p=reweight_p,
                   reduce_dim=reduce_dim, sources=sources, split=split,
                   eval=evaluation, seed=seed,
                   lowercase=bool(raw.get("lowercase", False)),
                   max_words=None if max_words is None else int(max_words),
                   clean_dicts=bool(raw.get("clean_dicts", True)))

    def canonical(self) -> dict:
        """Fully resolved configuration, suitable for hashing."""
        return {
            "reference": self.reference,
            "targets": self.targets,
            "out_dir": self.out_dir,
            "method": self.method,
            "normalize": list(self.normalize),
            "reweight_p": self.reweight_p,
            "reduce_dim": self.reduce_dim,
            "sources": self.sources,
            "split": self.split,
            "eval": self.eval,
            "seed": self.seed,
            "lowercase": self.lowercase,
            "max_words": self.max_words,
            "clean_dicts": self.clean_dicts,
        }


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@contextmanager
def _stage(name: str):
    logger.info("stage=%s status=start", name)
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        logger.error("stage=%s status=failed error=%s", name, exc)
        raise PipelineStageError(name, exc) from exc
    logger.info("stage=%s status=done", name)


def _oriented_ref_first(pairs: DictionaryPairs, ref_lang: str, other_lang: str):
    if (pairs.src_lang, pairs.tgt_lang) == (ref_lang, other_lang):
        return pairs
    if (pairs.src_lang, pairs.tgt_lang) == (other_lang, ref_lang):
        return transpose(pairs)
    raise DataError(f"dictionary covers {pairs.src_lang}->{pairs.tgt_lang}, "
                    f"needed {ref_lang}<->{other_lang}")


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute the configured run and return the manifest (also written to
    out_dir/manifest.json). Raises PipelineStageError on any stage failure,
    leaving the INCOMPLETE marker in place."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("run started; artifacts may be partial\n", encoding="utf-8")

    ref_lang = cfg.reference["lang"]
    input_paths = {cfg.reference["path"]}
    input_paths.update(t["path"] for t in cfg.targets)
    input_paths.update(t["dict"] for t in cfg.targets)
    if cfg.eval and cfg.eval["test"]:
        input_paths.add(cfg.eval["test"])
    artifact_names: list[str] = []

    def emit(name: str):
        artifact_names.append(name)
        return out / name

    train_dicts: dict[str, DictionaryPairs] = {}
    test_dicts: dict[str, DictionaryPairs] = {}
    with _stage("dict"):
        for target in cfg.targets:
            lang = target["lang"]
            langs = (ref_lang, lang) if target["dict_direction"] == "ref2other" \
                else (lang, ref_lang)
            pairs = load_dictionary(target["dict"], *langs)
            if cfg.clean_dicts:
                pairs = clean_dictionary(pairs)
            if cfg.split:
                train, test = split_dictionary(pairs, cfg.split["test_size"],
                                               cfg.split["seed"])
                from .dictionary import save_dictionary
                save_dictionary(train, emit(f"{ref_lang}-{lang}.train.tsv"))
                save_dictionary(test, emit(f"{ref_lang}-{lang}.test.tsv"))
                train_dicts[lang], test_dicts[lang] = train, test
            else:
                train_dicts[lang] = pairs

    spaces: MultiSpace
    with _stage("align"):
        reference = normalize(load_embeddings(cfg.reference["path"], cfg.max_words,
                                              cfg.lowercase, language=ref_lang),
                              cfg.normalize)
        others = {t["lang"]: normalize(load_embeddings(t["path"], cfg.max_words,
                                                       cfg.lowercase,
                                                       language=t["lang"]),
                                       cfg.normalize)
                  for t in cfg.targets}
        if cfg.method == "orthogonal":
            merged = {ref_lang: AlignedSpace(reference, (), ref_lang)}
            for lang, emb in others.items():
                ms = align_orthogonal(reference, emb, train_dicts[lang])
                merged[lang] = ms[lang]
            spaces = MultiSpace(merged, hub=ref_lang)
        elif cfg.method == "multistep":
            (lang, emb), = others.items()
            spaces = align_multistep(reference, emb, train_dicts[lang],
                                     reweight_p=cfg.reweight_p,
                                     reduce_dim=cfg.reduce_dim)
        elif cfg.method == "meemi":
            (lang, emb), = others.items()
            ms = align_orthogonal(reference, emb, train_dicts[lang])
            spaces = meemi_bilingual(ms, train_dicts[lang])
        else:
            aligned = []
            for lang, emb in others.items():
                ms = align_orthogonal(reference, emb, train_dicts[lang])
                aligned.append((ms[lang], train_dicts[lang]))
            hub_space = AlignedSpace(reference, (), ref_lang)
            spaces = meemi_multilingual(hub_space, aligned, set(cfg.sources))
        for lang in spaces.languages():
            space = spaces[lang]
            save_embeddings(space.embedding, emit(f"{lang}.aligned.vec"))
            if space.maps_applied:
                save_maps(space.maps_applied, emit(f"{lang}.map"))

    if cfg.eval:
        with _stage("eval"):
            reports = []
            for target in cfg.targets:
                lang = target["lang"]
                if cfg.eval["test"]:
                    langs = (ref_lang, lang) if target["dict_direction"] == "ref2other" \
                        else (lang, ref_lang)
                    test = load_dictionary(cfg.eval["test"], *langs)
                else:
                    test = test_dicts[lang]
                test = _oriented_ref_first(test, ref_lang, lang)
                reports.append(precision_at_k(spaces[ref_lang], spaces[lang], test,
                                              ks=cfg.eval["ks"],
                                              oov_policy=cfg.eval["oov_policy"],
                                              method_label=cfg.eval["label"]))
            emit("report.json").write_text(render_report(reports, "json"),
                                           encoding="utf-8")
            emit("report.txt").write_text(render_report(reports, "table"),
                                          encoding="utf-8")

    canonical = cfg.canonical()
    config_json = json.dumps(canonical, sort_keys=True)
    manifest = {
        "config": canonical,
        "config_sha256": _sha256_text(config_json),
        "inputs": {path: _sha256_file(path) for path in sorted(input_paths)},
        "artifacts": {name: _sha256_file(out / name) for name in sorted(artifact_names)},
        "versions": {
            "lexalign": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                       encoding="utf-8")
    marker.unlink()
    logger.info("run complete: %d artifacts in %s", len(artifact_names) + 1, out)
    return manifest


def _package_version() -> str:
    from . import __version__
    return __version__
