"""Command-line pipeline: learn, rewrite, eval, metrics, ingest.

Every subcommand reads file-based inputs, writes artifacts atomically into
--out, and embeds its run configuration plus input digests into each artifact
for provenance. Runs are deterministic given (inputs, flags, seed); the
thread count changes wall time only, never bytes, and is therefore left out
of the embedded configuration.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import __version__
from .evaluate import (
    BASELINE_KINDS, align_radicals, baseline_spans, corpus_spans,
    read_gold_spans, read_radical_inventory, score_spans, write_spans,
)
from .fileio import atomic_write_text, canon_json, sha256_file, write_jsonl
from .ingest import (
    cluster_strokes, encode_corpus, fit_bezier, load_corpus,
    read_alphabet, read_trajectories, write_alphabet, write_corpus,
)
from .lang import (
    CHINESE_STROKES, Corpus, CostModel, ExpansionError, Library, ParseError,
    PrimitiveAlphabet, cost, read_library, write_library,
)
from .learn import LearnConfig, learn_library
from .metrics import (
    complexity_report, diachronic_compare, script_pair_compare,
    write_reports_csv,
)
from .rewrite import rewrite_corpus_entries

__all__ = ["main", "RunConfig"]

_BAD_INPUT_ERRORS = (ValueError, ParseError, ExpansionError, OSError)


@dataclass(frozen=True)
class RunConfig:
    """Flags that affect results; embedded verbatim into every artifact."""

    cost_terminal: int = 100
    cost_app: int = 1
    max_arity: int = 3
    iters: int = 10_000
    seed: int = 0
    span_mode: str = "subtree"
    include_full_span: bool = False

    def as_dict(self) -> dict:
        return {
            "cost_terminal": self.cost_terminal,
            "cost_app": self.cost_app,
            "max_arity": self.max_arity,
            "iters": self.iters,
            "seed": self.seed,
            "span_mode": self.span_mode,
            "include_full_span": self.include_full_span,
        }

    def model(self) -> CostModel:
        return CostModel(terminal_cost=self.cost_terminal,
                         application_cost=self.cost_app)

    def learn_config(self, threads: int = 1) -> LearnConfig:
        return LearnConfig(max_arity=self.max_arity, max_iterations=self.iters,
                           threads=threads)


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cost-terminal", type=int, default=100, metavar="N",
                   help="description-length cost per leaf symbol (default 100)")
    p.add_argument("--cost-app", type=int, default=1, metavar="N",
                   help="description-length cost per application (default 1)")
    p.add_argument("--max-arity", type=int, default=3, metavar="N",
                   help="maximum abstraction arity (default 3)")
    p.add_argument("--iters", type=int, default=10_000, metavar="N",
                   help="learner iteration cap (default 10000)")
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="seed for randomized steps (default 0)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for corpus rewriting (default 1)")
    p.add_argument("--span-mode", choices=["subtree", "body"],
                   default="subtree",
                   help="span convention for decomposition extraction")
    p.add_argument("--include-full-span", action="store_true",
                   help="score the whole-glyph span instead of dropping it")
    p.add_argument("--out", default=".", metavar="DIR",
                   help="output directory (default: current directory)")
    p.add_argument("--alphabet", default=None, metavar="FILE",
                   help="derived-alphabet JSON for corpora over non-standard "
                        "primitives (default: the built-in stroke alphabet)")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        cost_terminal=args.cost_terminal, cost_app=args.cost_app,
        max_arity=args.max_arity, iters=args.iters, seed=args.seed,
        span_mode=args.span_mode, include_full_span=args.include_full_span,
    )
    cfg.model()          # validates the cost constants
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    return cfg


def _meta(cfg: RunConfig, inputs: dict[str, str]) -> dict:
    return {
        "tool": {"name": "glyphlib", "version": __version__},
        "config": cfg.as_dict(),
        "inputs": {name: {"path": str(path), "sha256": sha256_file(path)}
                   for name, path in inputs.items()},
    }


def _base_library(args: argparse.Namespace) -> Library:
    if args.alphabet is None:
        return Library(CHINESE_STROKES)
    derived = read_alphabet(args.alphabet)
    return Library(derived.to_alphabet())


def _out_path(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(path: str, doc: dict) -> None:
    atomic_write_text(path, canon_json(doc) + "\n")


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_learn(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    base = _base_library(args)
    corpus = load_corpus(args.corpus, base)
    model = cfg.model()
    lib, rewritten, trace = learn_library(corpus, model,
                                          cfg.learn_config(args.threads))
    meta = _meta(cfg, {"corpus": args.corpus})

    write_library(lib, _out_path(args, "library.txt"),
                  meta_lines=[f"meta {canon_json(meta)}"])
    write_corpus(_out_path(args, "rewritten.jsonl"), rewritten, meta=meta)
    trace_records = [
        {"iteration": s.iteration, "fn": s.name, "arity": s.arity,
         "utility": s.utility, "corpus_dl": s.corpus_dl,
         "library_dl": s.library_dl}
        for s in trace.steps
    ]
    write_jsonl(_out_path(args, "trace.jsonl"), trace_records, meta=meta)

    final_dl = sum(cost(e, model) for e in rewritten.entries.values())
    ratio = trace.initial_corpus_dl / final_dl if final_dl else 1.0
    lib_dl = sum(cost(fn.body, model) for fn in lib.learned)
    print(f"learned {len(lib.learned)} abstraction(s); corpus DL "
          f"{trace.initial_corpus_dl} -> {final_dl} (ratio {ratio:.3f}); "
          f"library DL {lib_dl}; total {final_dl + lib_dl}")
    if trace.capped:
        print("error: iteration cap reached before convergence was confirmed; "
              "artifacts reflect the partial run", file=sys.stderr)
        return 1
    return 0


def _cmd_rewrite(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    base = _base_library(args)
    lib = read_library(args.library, base.base)
    corpus = load_corpus(args.corpus, lib)
    model = cfg.model()
    entries = rewrite_corpus_entries(corpus.entries, lib, model,
                                     threads=args.threads)
    rewritten = Corpus(corpus.alphabet, entries)
    meta = _meta(cfg, {"corpus": args.corpus, "library": args.library})
    write_corpus(_out_path(args, "rewritten.jsonl"), rewritten, meta=meta)
    before = sum(cost(e, model) for e in corpus.entries.values())
    after = sum(cost(e, model) for e in entries.values())
    ratio = before / after if after else 1.0
    print(f"rewrote {len(entries)} program(s); corpus DL {before} -> {after} "
          f"(ratio {ratio:.3f})")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    base = _base_library(args)
    lib = read_library(args.library, base.base)
    rewritten = load_corpus(args.rewritten, lib)
    gold = read_gold_spans(args.gold)

    predicted = corpus_spans(rewritten, lib, mode=cfg.span_mode)
    report = score_spans(predicted, gold,
                         include_full_span=cfg.include_full_span)
    inputs = {"rewritten": args.rewritten, "library": args.library,
              "gold": args.gold}
    doc: dict = {"model": report.as_dict()}
    print(f"model: F1 {report.f1:.1f}  P {report.precision:.1f}  "
          f"R {report.recall:.1f}  exact {report.exact_match:.1f}  "
          f"({report.n_glyphs} glyphs)")

    if args.baselines:
        doc["baselines"] = {}
        for kind in BASELINE_KINDS:
            spans = baseline_spans(gold, kind, seed=cfg.seed)
            rep = score_spans(spans, gold,
                              include_full_span=cfg.include_full_span)
            doc["baselines"][kind] = rep.as_dict()
            print(f"baseline {kind}: F1 {rep.f1:.1f}  P {rep.precision:.1f}  "
                  f"R {rep.recall:.1f}  exact {rep.exact_match:.1f}")

    if args.radicals:
        inventory = read_radical_inventory(args.radicals)
        alignment = align_radicals(lib, inventory)
        doc["radicals"] = alignment.as_dict()
        inputs["radicals"] = args.radicals
        print(f"radicals: {len(alignment.matched)}/{len(inventory)} discovered "
              f"({100.0 * alignment.discovered_fraction:.1f}%)")

    doc["meta"] = _meta(cfg, inputs)
    _write_json(_out_path(args, "eval.json"), doc)
    if args.emit_spans:
        write_spans(_out_path(args, "spans.jsonl"), predicted,
                    meta=doc["meta"])
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    base = _base_library(args)
    model = cfg.model()
    learn_cfg = cfg.learn_config(args.threads)
    corpora = [(_stem(p), load_corpus(p, base)) for p in args.corpora]
    names = [sid for sid, _ in corpora]
    if len(set(names)) != len(names):
        raise ValueError(f"corpus files must have distinct basenames: {names}")
    meta = _meta(cfg, {sid: path for (sid, _), path in zip(corpora, args.corpora)})

    if args.pair:
        if len(corpora) != 2:
            raise ValueError("--pair needs exactly two corpus files")
        (a_id, a), (b_id, b) = corpora
        comparison = script_pair_compare(a, b, model, learn_cfg,
                                         a_id=a_id, b_id=b_id)
        doc = {"meta": meta, "pair": comparison.as_dict()}
        reports = [comparison.a_report, comparison.b_report]
        print(f"{a_id} vs {b_id} on {comparison.n_aligned} aligned glyphs: "
              f"base DL {comparison.dl_base_pct_diff:+.1f}%, "
              f"rewritten DL {comparison.dl_star_pct_diff:+.1f}%, "
              f"ratios {comparison.ratio_a:.3f} vs {comparison.ratio_b:.3f}")
    elif len(corpora) == 1:
        sid, corpus = corpora[0]
        lib, rewritten, _ = learn_library(corpus, model, learn_cfg)
        report = complexity_report(corpus, lib, rewritten, model, corpus_id=sid)
        doc = {"meta": meta, "reports": [report.as_dict()]}
        reports = [report]
        print(f"{sid}: ratio {report.compression_ratio:.3f}, "
              f"C(W) {report.c_of_w}, library size {report.library_size}")
    else:
        table = diachronic_compare(corpora, model, learn_cfg)
        doc = {"meta": meta, **table.as_dict()}
        reports = [rep for _, rep in table.rows]
        for sid, rep in table.rows:
            print(f"{sid}: ratio {rep.compression_ratio:.3f}, "
                  f"C(W) {rep.c_of_w}, library size {rep.library_size}")

    _write_json(_out_path(args, "metrics.json"), doc)
    write_reports_csv(_out_path(args, "metrics.csv"),
                      [r for r in reports if r is not None])
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if args.k < 1:
        raise ValueError("--k must be >= 1")
    stems = [_stem(p) for p in args.trajectories]
    if len(set(stems)) != len(stems):
        raise ValueError(f"trajectory files must have distinct basenames: {stems}")
    single = len(args.trajectories) == 1
    per_file = [(stem, path, read_trajectories(path))
                for stem, path in zip(stems, args.trajectories)]

    def ingest_one(fits, trajs, alphabet_name, corpus_name, inputs):
        alphabet = cluster_strokes(fits, k=args.k, seed=cfg.seed)
        meta = _meta(cfg, inputs)
        write_alphabet(_out_path(args, alphabet_name), alphabet, meta=meta)
        corpora = []
        for stem, path, trajectories in trajs:
            corpus, excluded = encode_corpus(trajectories, alphabet,
                                             assign_threshold=args.assign_threshold)
            for gid, idx, dist in excluded:
                print(f"excluded {gid}: stroke {idx} at distance {dist:.4f}",
                      file=sys.stderr)
            name = corpus_name if single else f"corpus_{stem}.jsonl"
            write_corpus(_out_path(args, name), corpus, meta=meta)
            corpora.append((stem, len(corpus.entries), len(excluded)))
        return corpora

    if args.joint:
        fits = [fit_bezier(s)
                for _, _, trajectories in per_file
                for traj in trajectories for s in traj.strokes]
        inputs = {stem: path for stem, path, _ in per_file}
        results = ingest_one(fits, per_file, "alphabet.json", "corpus.jsonl",
                             inputs)
    else:
        results = []
        for stem, path, trajectories in per_file:
            fits = [fit_bezier(s) for traj in trajectories
                    for s in traj.strokes]
            alphabet_name = "alphabet.json" if single else f"alphabet_{stem}.json"
            results += ingest_one(fits, [(stem, path, trajectories)],
                                  alphabet_name, "corpus.jsonl", {stem: path})

    for stem, kept, dropped in results:
        print(f"{stem}: encoded {kept} glyph(s)"
              + (f", excluded {dropped}" if dropped else ""))
    return 0


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glyphlib",
        description="Learn, apply, and evaluate stroke-program libraries.")
    parser.add_argument("--version", action="version",
                        version=f"glyphlib {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a library from a corpus file")
    p.add_argument("corpus", help="corpus JSONL ({'id','program'} per line)")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("rewrite", help="rewrite a corpus under an existing library")
    p.add_argument("corpus", help="corpus JSONL to rewrite")
    p.add_argument("--library", required=True, metavar="FILE",
                   help="library definition file")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_rewrite)

    p = sub.add_parser("eval", help="score decomposition spans against gold")
    p.add_argument("rewritten", help="rewritten corpus JSONL")
    p.add_argument("--library", required=True, metavar="FILE",
                   help="library definition file")
    p.add_argument("--gold", required=True, metavar="FILE",
                   help="gold span JSONL ({'id','n','spans'} per line)")
    p.add_argument("--baselines", action="store_true",
                   help="also score the four reference bracketings")
    p.add_argument("--radicals", default=None, metavar="FILE",
                   help="radical inventory JSONL to align with the library")
    p.add_argument("--emit-spans", action="store_true",
                   help="also write the predicted spans as spans.jsonl")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("metrics", help="complexity reports over one or more corpora")
    p.add_argument("corpora", nargs="+", metavar="CORPUS",
                   help="corpus JSONL file(s), in epoch order")
    p.add_argument("--pair", action="store_true",
                   help="compare exactly two corpora on aligned glyph ids")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("ingest", help="derive an alphabet and corpus from trajectories")
    p.add_argument("trajectories", nargs="+", metavar="TRAJ",
                   help="trajectory JSONL file(s)")
    p.add_argument("--k", type=int, default=33, metavar="N",
                   help="number of stroke clusters (default 33)")
    p.add_argument("--joint", action="store_true",
                   help="cluster all input files' strokes into one shared alphabet")
    p.add_argument("--assign-threshold", type=float, default=None, metavar="X",
                   help="exclude glyphs with a stroke farther than X from every "
                        "centroid (default: no exclusion)")
    _add_shared_flags(p)
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _BAD_INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 — the CLI boundary reports and exits
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
