"""Nearest-neighbor translation retrieval and precision-at-k evaluation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .align import AlignedSpace
from .errors import DataError

logger = logging.getLogger(__name__)

_EPS = 1e-12
_BLOCK_ROWS = 8192


def _embedding_of(space):
    return space.embedding if isinstance(space, AlignedSpace) else space


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.maximum(norms, _EPS)


def cosine_scores(query: np.ndarray, unit_matrix: np.ndarray,
                  backend: str = "blocked") -> np.ndarray:
    """Cosine of `query` against every row of a row-normalized matrix.

    backend "exact" is the brute-force reference: one dense product over the
    whole matrix. backend "blocked" computes the same product in row blocks to
    bound the working set; each row's accumulation is unchanged by blocking,
    so the two backends return identical scores and therefore identical
    rankings (the retrieval tests enforce this, tie order included).
    """
    q = query / max(np.linalg.norm(query), _EPS)
    if backend == "exact":
        return unit_matrix @ q
    if backend != "blocked":
        raise ValueError(f"unknown backend {backend!r}")
    out = np.empty(unit_matrix.shape[0])
    for start in range(0, unit_matrix.shape[0], _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, unit_matrix.shape[0])
        out[start:stop] = unit_matrix[start:stop] @ q
    return out


def rank_by_score(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores rank the lower index first."""
    return np.argsort(-scores, kind="stable")


def induce(query, target_space, k: int, backend: str = "blocked"):
    """The k nearest target words to `query` by cosine, best first.

    Returns (word, score) tuples. Ties break toward the earlier vocabulary
    index, so results are reproducible across runs and backends.
    """
    emb = _embedding_of(target_space)
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != emb.dim:
        raise DataError(f"query has dimension {q.shape[0]}, space has {emb.dim}")
    if not np.isfinite(q).all():
        raise DataError("query has non-finite values")
    if np.linalg.norm(q) == 0.0:
        raise DataError("query vector is zero")
    if not 1 <= k <= len(emb):
        raise DataError(f"k must be in [1, {len(emb)}], got {k}")
    scores = cosine_scores(q, _unit_rows(emb.matrix), backend=backend)
    order = rank_by_score(scores)[:k]
    return [(emb.words[i], float(scores[i])) for i in order]


@dataclass
class EvalReport:
    """Precision-at-k figures for one language pair and method.

    precision maps k to a fraction in [0, 1]; evaluated counts the distinct
    test source words that entered the denominator; skipped_oov_src counts
    the distinct source words excluded for being out of vocabulary;
    gold_oov_tgt counts test pairs whose gold target is out of vocabulary.
    """

    src_lang: str
    tgt_lang: str
    k_values: tuple[int, ...]
    precision: dict[int, float]
    evaluated: int
    skipped_oov_src: int = 0
    gold_oov_tgt: int = 0
    method_label: str = ""

    def __post_init__(self):
        self.k_values = tuple(sorted({int(k) for k in self.k_values}))
        if not self.k_values or self.k_values[0] < 1:
            raise DataError(f"k values must be positive integers, got {self.k_values}")
        self.precision = {int(k): float(v) for k, v in self.precision.items()}
        missing = [k for k in self.k_values if k not in self.precision]
        if missing:
            raise DataError(f"missing precision for k={missing}")
        series = [self.precision[k] for k in self.k_values]
        if any(not 0.0 <= v <= 1.0 for v in series):
            raise DataError(f"precision outside [0, 1]: {series}")
        if any(b < a - 1e-12 for a, b in zip(series, series[1:])):
            raise DataError(f"precision must be non-decreasing in k: {series}")
        if self.evaluated < 0 or self.skipped_oov_src < 0 or self.gold_oov_tgt < 0:
            raise DataError("counts must be non-negative")


def precision_at_k(src_space, tgt_space, test: "DictionaryPairs", ks=(1, 5, 10),
                   oov_policy: str = "skip", method_label: str = "") -> EvalReport:
    """Evaluate translation retrieval on a test dictionary.

    Each distinct test source word is one unit, counted correct at k when any
    of its in-vocabulary gold targets appears in the top k. oov_policy "skip"
    removes out-of-vocabulary source words from the denominator (they are
    counted in skipped_oov_src); "fail" keeps them as guaranteed misses.
    """
    if oov_policy not in ("skip", "fail"):
        raise ValueError(f"oov_policy must be 'skip' or 'fail', got {oov_policy!r}")
    src_emb = _embedding_of(src_space)
    tgt_emb = _embedding_of(tgt_space)
    if (test.src_lang, test.tgt_lang) != (src_emb.language, tgt_emb.language):
        raise DataError(f"test set is {test.src_lang}->{test.tgt_lang}, spaces are "
                        f"{src_emb.language}->{tgt_emb.language}")
    if not test.pairs:
        raise DataError("empty test set")
    ks = tuple(sorted({int(k) for k in ks}))
    if not ks or ks[0] < 1:
        raise DataError(f"k values must be positive, got {ks}")

    golds: dict[str, list[str]] = {}
    for s, t in test.pairs:
        golds.setdefault(s, []).append(t)
    gold_oov_tgt = sum(1 for _, t in test.pairs if t not in tgt_emb)

    in_vocab = [s for s in golds if s in src_emb]
    skipped = len(golds) - len(in_vocab)
    if oov_policy == "skip":
        evaluated = len(in_vocab)
        if evaluated == 0:
            raise DataError("every test source word is out of vocabulary")
    else:
        evaluated = len(golds)

    depth = min(max(ks), len(tgt_emb))
    tgt_unit = _unit_rows(tgt_emb.matrix)
    hits = {k: 0 for k in ks}
    for word in in_vocab:
        scores = cosine_scores(src_emb.vector(word), tgt_unit)
        top = rank_by_score(scores)[:depth]
        position = {tgt_emb.words[i]: rank for rank, i in enumerate(top)}
        best = min((position[t] for t in golds[word] if t in position), default=None)
        if best is None:
            continue
        for k in ks:
            if best < k:
                hits[k] += 1

    report = EvalReport(src_lang=src_emb.language, tgt_lang=tgt_emb.language,
                        k_values=ks, precision={k: hits[k] / evaluated for k in ks},
                        evaluated=evaluated,
                        skipped_oov_src=skipped if oov_policy == "skip" else 0,
                        gold_oov_tgt=gold_oov_tgt, method_label=method_label)
    logger.info("eval %s->%s: %s evaluated=%d skipped_oov_src=%d gold_oov_tgt=%d",
                report.src_lang, report.tgt_lang,
                " ".join(f"P@{k}={report.precision[k]:.4f}" for k in ks),
                report.evaluated, report.skipped_oov_src, report.gold_oov_tgt)
    return report


def _report_dict(r: EvalReport) -> dict:
    return {
        "method_label": r.method_label,
        "src_lang": r.src_lang,
        "tgt_lang": r.tgt_lang,
        "k_values": list(r.k_values),
        "precision": {str(k): r.precision[k] for k in r.k_values},
        "evaluated": r.evaluated,
        "skipped_oov_src": r.skipped_oov_src,
        "gold_oov_tgt": r.gold_oov_tgt,
    }


def reports_from_json(text: str) -> list[EvalReport]:
    """Inverse of render_report(..., "json")."""
    return [EvalReport(src_lang=d["src_lang"], tgt_lang=d["tgt_lang"],
                       k_values=tuple(d["k_values"]),
                       precision={int(k): v for k, v in d["precision"].items()},
                       evaluated=d["evaluated"],
                       skipped_oov_src=d["skipped_oov_src"],
                       gold_oov_tgt=d["gold_oov_tgt"],
                       method_label=d["method_label"])
            for d in json.loads(text)]


def render_report(reports, fmt: str = "table") -> str:
    """Render reports as "json" (lossless round trip), "tsv" (one row per
    report and k), or "table" (methods as rows, language-pair/k columns,
    percentages with one decimal). Deterministic: same reports, same bytes.
    An empty report list yields just the header."""
    reports = list(reports)
    if fmt == "json":
        return json.dumps([_report_dict(r) for r in reports], sort_keys=True, indent=2) + "\n"
    if fmt == "tsv":
        lines = ["method\tsrc\ttgt\tk\tprecision\tevaluated\tskipped_oov_src\tgold_oov_tgt"]
        for r in reports:
            for k in r.k_values:
                lines.append(f"{r.method_label}\t{r.src_lang}\t{r.tgt_lang}\t{k}"
                             f"\t{r.precision[k]:.6f}\t{r.evaluated}"
                             f"\t{r.skipped_oov_src}\t{r.gold_oov_tgt}")
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")

    pair_order: list[tuple[str, str]] = []
    methods: list[str] = []
    cells = {}
    all_ks = sorted({k for r in reports for k in r.k_values})
    for r in reports:
        key = (r.src_lang, r.tgt_lang)
        if key not in pair_order:
            pair_order.append(key)
        label = r.method_label or "unlabeled"
        if label not in methods:
            methods.append(label)
        for k in r.k_values:
            cells[(label, r.src_lang, r.tgt_lang, k)] = r.precision[k]
    columns = [(s, t, k) for s, t in pair_order for k in all_ks]
    headers = ["method"] + [f"{s}-{t}:P@{k}" for s, t, k in columns]
    rows = []
    for label in methods:
        row = [label]
        for s, t, k in columns:
            v = cells.get((label, s, t, k))
            row.append("" if v is None else f"{100.0 * v:.1f}")
        rows.append(row)
    widths = [max(len(h), max((len(r[i]) for r in rows), default=0))
              for i, h in enumerate(headers)]
    def format_row(cells_):
        first = cells_[0].ljust(widths[0])
        rest = [c.rjust(widths[i + 1]) for i, c in enumerate(cells_[1:])]
        return "  ".join([first] + rest).rstrip()
    return "\n".join([format_row(headers)] + [format_row(r) for r in rows]) + "\n"
