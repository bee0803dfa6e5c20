"""Command-line front end.

One executable, subcommands for each operation. Exit codes: 0 success,
1 usage error, 2 data error (bad files, shapes, vocabulary problems),
3 external service error (translation endpoint failures).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .align import align_multistep, align_orthogonal, AlignedSpace, meemi_bilingual, \
    meemi_multilingual, MultiSpace
from .dictionary import (clean_dictionary, load_dictionary, merge_dictionaries,
                         save_dictionary, split_dictionary)
from .embeddings import DEFAULT_NORMALIZE, load_embeddings, normalize, save_embeddings
from .errors import DataError, ExternalServiceError, LexalignError, PipelineStageError, \
    TranslationError
from .induction import induce, precision_at_k, render_report
from .maps import save_maps
from .pipeline import PipelineConfig, run_pipeline
from .translate import HttpTranslationClient, ReplayClient, reverse_filter, \
    translate_wordlist

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SERVICE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _parse_steps(text: str) -> tuple:
    if text in ("", "none"):
        return ()
    return tuple(part.strip() for part in text.split(","))


def _parse_ks(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise _UsageError(f"bad k list {text!r}, expected comma-separated integers") from None


def _load_space(path, lang, steps, max_words=None, lowercase=False):
    emb = load_embeddings(path, max_words=max_words, lowercase=lowercase, language=lang)
    return normalize(emb, steps) if steps else emb


def _write_space(space: AlignedSpace, vec_path) -> None:
    save_embeddings(space.embedding, vec_path)
    if space.maps_applied:
        save_maps(space.maps_applied, f"{os.fspath(vec_path)}.map")


def cmd_align(args) -> int:
    steps = _parse_steps(args.normalize)
    if args.method in ("multistep", "meemi") and not args.out_ref:
        raise _UsageError(f"method {args.method} moves the reference space too; "
                          f"pass --out-ref")
    reference = _load_space(args.ref, args.ref_lang, steps, args.max_words, args.lowercase)
    other = _load_space(args.other, args.other_lang, steps, args.max_words, args.lowercase)
    langs = (reference.language, other.language) if args.dict_direction == "ref2other" \
        else (other.language, reference.language)
    pairs = load_dictionary(args.dict, *langs)
    if args.method == "orthogonal":
        ms = align_orthogonal(reference, other, pairs)
    elif args.method == "multistep":
        ms = align_multistep(reference, other, pairs, reweight_p=args.reweight_p,
                             reduce_dim=args.reduce_dim)
    else:
        ms = meemi_bilingual(align_orthogonal(reference, other, pairs), pairs)
    _write_space(ms[other.language], args.out)
    if args.out_ref:
        _write_space(ms[reference.language], args.out_ref)
    return EXIT_OK


def cmd_align_multi(args) -> int:
    steps = _parse_steps(args.normalize)
    reference = _load_space(args.ref, args.ref_lang, steps, args.max_words, args.lowercase)
    aligned = []
    for pair_text in args.pair:
        parts = pair_text.split(":")
        if len(parts) != 3:
            raise _UsageError(f"bad --pair {pair_text!r}, expected LANG:VEC:DICT")
        lang, vec_path, dict_path = parts
        other = _load_space(vec_path, lang, steps, args.max_words, args.lowercase)
        pairs = load_dictionary(dict_path, reference.language, lang)
        ms = align_orthogonal(reference, other, pairs)
        aligned.append((ms[lang], pairs))
    if args.method == "meemi-multi":
        sources = set(args.sources.split(",")) if args.sources else set()
        sources.add(reference.language)
        hub_space = AlignedSpace(reference, (), reference.language)
        result = meemi_multilingual(hub_space, aligned, sources,
                                    all_combinations=args.all_combinations)
    else:
        merged = {reference.language: AlignedSpace(reference, (), reference.language)}
        merged.update((space.language, space) for space, _ in aligned)
        result = MultiSpace(merged, hub=reference.language)
    os.makedirs(args.out_dir, exist_ok=True)
    for lang in result.languages():
        _write_space(result[lang], os.path.join(args.out_dir, f"{lang}.aligned.vec"))
    return EXIT_OK


def cmd_meemi(args) -> int:
    src = load_embeddings(args.src, language=args.src_lang)
    tgt = load_embeddings(args.tgt, language=args.tgt_lang)
    pairs = load_dictionary(args.dict, src.language, tgt.language)
    ms = MultiSpace({src.language: AlignedSpace(src, (), tgt.language),
                     tgt.language: AlignedSpace(tgt, (), tgt.language)},
                    hub=tgt.language)
    result = meemi_bilingual(ms, pairs)
    _write_space(result[src.language], args.out_src)
    _write_space(result[tgt.language], args.out_tgt)
    return EXIT_OK


def cmd_induce(args) -> int:
    tgt = load_embeddings(args.space, language=args.lang)
    query_emb = tgt if args.query_space is None \
        else load_embeddings(args.query_space, language=args.query_lang)
    query = query_emb.vector(args.word)
    for word, score in induce(query, tgt, args.k, backend=args.backend):
        print(f"{word}\t{score:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    src = load_embeddings(args.src, language=args.src_lang)
    tgt = load_embeddings(args.tgt, language=args.tgt_lang)
    test = load_dictionary(args.test, src.language, tgt.language)
    report = precision_at_k(src, tgt, test, ks=_parse_ks(args.ks),
                            oov_policy=args.oov_policy, method_label=args.label)
    text = render_report([report], args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dict_build(args) -> int:
    if not args.endpoint and not args.cache:
        raise _UsageError("dict-build needs --endpoint or --cache")
    with open(args.words, "r", encoding="utf-8") as fh:
        words = [line.strip() for line in fh if line.strip()]
    if args.endpoint:
        client = HttpTranslationClient(args.endpoint, rps=args.rps,
                                       cache_path=args.cache,
                                       max_retries=args.retries)
    else:
        client = ReplayClient(args.cache)
    pairs, forward = translate_wordlist(client, words, args.src_lang, args.tgt_lang,
                                        workers=args.workers)
    summary = {"requested": forward.requested, "translated": forward.kept,
               "dropped_multi_token": forward.dropped_multi_token,
               "dropped_empty": forward.dropped_empty,
               "failed": len(forward.failed)}
    if forward.requested and len(forward.failed) == forward.requested:
        raise TranslationError(f"all {forward.requested} translation requests failed")
    if not args.no_reverse:
        pairs, backward = reverse_filter(client, pairs, fold_case=args.fold_case,
                                         workers=args.workers)
        summary.update({"round_trip_checked": backward.checked,
                        "round_trip_kept": backward.kept,
                        "round_trip_mismatched": backward.mismatched,
                        "round_trip_failed": len(backward.failed)})
    save_dictionary(pairs, args.out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_dict_clean(args) -> int:
    pairs = load_dictionary(args.infile, on_bad_lines=args.on_bad_lines)
    cleaned = clean_dictionary(pairs)
    save_dictionary(cleaned, args.out)
    print(json.dumps({"read": len(pairs), "kept": len(cleaned)}, sort_keys=True))
    return EXIT_OK


def cmd_dict_merge(args) -> int:
    dicts = [load_dictionary(path) for path in args.infile]
    merged = dicts[0]
    for other in dicts[1:]:
        merged = merge_dictionaries(merged, other,
                                    reapply_token_filter=args.reapply_token_filter)
    save_dictionary(merged, args.out)
    print(json.dumps({"read": sum(len(d) for d in dicts), "kept": len(merged)},
                     sort_keys=True))
    return EXIT_OK


def cmd_dict_split(args) -> int:
    pairs = load_dictionary(args.infile)
    train, test = split_dictionary(pairs, args.test_size, args.seed)
    save_dictionary(train, args.out_train)
    save_dictionary(test, args.out_test)
    print(json.dumps({"train": len(train), "test": len(test)}, sort_keys=True))
    return EXIT_OK


def cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for override in args.set or []:
        if "=" not in override:
            raise _UsageError(f"bad --set {override!r}, expected KEY=VALUE")
        key, _, value = override.partition("=")
        try:
            raw[key] = json.loads(value)
        except ValueError:
            raw[key] = value
    manifest = run_pipeline(PipelineConfig.from_dict(raw))
    print(json.dumps({"out_dir": raw["out_dir"],
                      "artifacts": sorted(manifest["artifacts"])}, sort_keys=True))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lexalign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_space_args(p):
        p.add_argument("--normalize", default=",".join(DEFAULT_NORMALIZE),
                       help="comma-separated steps (unit, center) or 'none'")
        p.add_argument("--max-words", type=int, default=None)
        p.add_argument("--lowercase", action="store_true")

    p = sub.add_parser("align", help="align one space onto a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--other", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out", required=True, help="aligned other-language vectors")
    p.add_argument("--out-ref", default=None,
                   help="where to write the reference when the method moves it")
    p.add_argument("--method", choices=["orthogonal", "multistep", "meemi"],
                   default="orthogonal")
    p.add_argument("--ref-lang", default=None)
    p.add_argument("--other-lang", default=None)
    p.add_argument("--dict-direction", choices=["ref2other", "other2ref"],
                   default="ref2other")
    p.add_argument("--reweight-p", type=float, default=0.5)
    p.add_argument("--reduce-dim", type=int, default=None)
    common_space_args(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("align-multi", help="align several spaces onto one reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--ref-lang", default=None)
    p.add_argument("--pair", action="append", required=True, metavar="LANG:VEC:DICT")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", choices=["orthogonal", "meemi-multi"], default="orthogonal")
    p.add_argument("--sources", default="",
                   help="comma-separated languages whose dictionary coverage is required")
    p.add_argument("--all-combinations", action="store_true")
    common_space_args(p)
    p.set_defaults(func=cmd_align_multi)

    p = sub.add_parser("meemi", help="midpoint refit of two already-aligned spaces")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    p.add_argument("--src-lang", default=None)
    p.add_argument("--tgt-lang", default=None)
    p.set_defaults(func=cmd_meemi)

    p = sub.add_parser("induce", help="nearest neighbors of one word")
    p.add_argument("--space", required=True, help="target vectors")
    p.add_argument("--lang", default=None)
    p.add_argument("--query-space", default=None,
                   help="where the query word lives (default: the target space)")
    p.add_argument("--query-lang", default=None)
    p.add_argument("--word", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--backend", choices=["blocked", "exact"], default="blocked")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("eval", help="precision at k over a test dictionary")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--src-lang", default=None)
    p.add_argument("--tgt-lang", default=None)
    p.add_argument("--ks", default="1,5,10")
    p.add_argument("--oov-policy", choices=["skip", "fail"], default="skip")
    p.add_argument("--format", choices=["json", "tsv", "table"], default="table")
    p.add_argument("--label", default="")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dict-build", help="build a dictionary by round-trip translation")
    p.add_argument("--words", required=True, help="one word per line")
    p.add_argument("--src-lang", required=True)
    p.add_argument("--tgt-lang", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--cache", default=None,
                   help="translation cache file (replayed when no endpoint is given)")
    p.add_argument("--rps", type=float, default=None)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-reverse", action="store_true",
                   help="skip the round-trip filter")
    p.add_argument("--fold-case", action="store_true")
    p.set_defaults(func=cmd_dict_build)

    p = sub.add_parser("dict-clean", help="drop duplicate and multi-token pairs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--on-bad-lines", choices=["error", "skip"], default="error")
    p.set_defaults(func=cmd_dict_clean)

    p = sub.add_parser("dict-merge", help="merge dictionaries, first occurrence wins")
    p.add_argument("--in", dest="infile", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reapply-token-filter", action="store_true")
    p.set_defaults(func=cmd_dict_merge)

    p = sub.add_parser("dict-split", help="hold out test source words")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_dict_split)

    p = sub.add_parser("run", help="execute a configured pipeline")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a top-level config key; flags win over the file")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s",
                        level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except PipelineStageError as exc:
        logger.error("%s", exc)
        return EXIT_SERVICE if isinstance(exc.cause, ExternalServiceError) else EXIT_DATA
    except ExternalServiceError as exc:
        logger.error("%s", exc)
        return EXIT_SERVICE
    except (LexalignError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
