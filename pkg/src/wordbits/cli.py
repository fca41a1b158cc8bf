"""Command line entry point.

Subcommands cover the pipeline stages (normalize, annotate, aggregate), the
corpus builder (build, stats), and the two analyses (fp-analyze, gam).  Every
output carries a provenance header (config hash, adapter identities, package
version); nothing records wall-clock time, so identical inputs give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, build, gam, pipeline
from .config import RunConfig, config_hash, load_config
from .fp import PREDICTORS, build_fp_dataset, fit_logistic
from .records import ParallelSegment
from .tables import read_table, write_table

_CONFIG_FLAGS = {
    "input": "input",
    "output_dir": "output_dir",
    "direction": "lpair",
    "mode": "mode",
    "scoring": "scoring",
    "window": "window",
    "cap": "cap",
    "seed": "seed",
    "workers": "workers",
    "align_threshold": "align_threshold",
    "replay_lm_base": "replay_lm_base",
    "replay_lm_ft": "replay_lm_ft",
    "replay_src_lm_base": "replay_src_lm_base",
    "replay_src_lm_ft": "replay_src_lm_ft",
    "replay_mt_base": "replay_mt_base",
    "replay_mt_ft": "replay_mt_ft",
    "replay_encoder": "replay_encoder",
    "replay_parser": "replay_parser",
}


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--input", help="input path for this stage")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--direction", choices=("de-en", "en-de"),
                   help="language pair, source first")
    p.add_argument("--mode", choices=("sp", "wr"))
    p.add_argument("--scoring", choices=("bounded", "window"))
    p.add_argument("--window", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--align-threshold", dest="align_threshold", type=float)
    p.add_argument("--replay", help="JSON manifest mapping adapter role to replay file")
    for role in ("lm-base", "lm-ft", "src-lm-base", "src-lm-ft",
                 "mt-base", "mt-ft", "encoder", "parser"):
        p.add_argument(f"--replay-{role}", dest=f"replay_{role.replace('-', '_')}")
    p.add_argument("--mock", action="store_true",
                   help="fall back to mock adapters for roles without a replay file")


def _config_from_args(args) -> RunConfig:
    overrides = {}
    if args.replay:
        with open(args.replay, encoding="utf-8") as f:
            manifest = json.load(f)
        for role, path in manifest.items():
            key = f"replay_{role.replace('-', '_')}"
            if key not in _CONFIG_FLAGS:
                raise ValueError(f"unknown adapter role in replay manifest: {role!r}")
            overrides[key] = path
    for flag, key in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, os.environ, overrides)


def _provenance(cfg: RunConfig, command: str, **extra) -> dict:
    prov = {"command": command, "config": config_hash(cfg),
            "version": __version__}
    prov.update({k: v for k, v in extra.items() if v is not None})
    return prov


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def _require_input(cfg: RunConfig):
    if not cfg.input:
        raise ValueError("no input path given (use --input or the config file)")
    return cfg.input


def cmd_normalize(args) -> int:
    cfg = _config_from_args(args)
    rows = pipeline.read_input_tsv(_require_input(cfg))
    segs = pipeline.normalize_rows(rows, cfg)
    out = _out(cfg, "clean.jsonl.gz")
    pipeline.write_jsonl(out, segs, meta=_provenance(cfg, "normalize"))
    print(f"wrote {out} ({len(segs)} segments)")
    return 0


def _adapter_names(adapters) -> dict:
    names = {}
    for role in ("lm_base", "lm_ft", "src_lm_base", "src_lm_ft",
                 "mt_base", "mt_ft", "encoder", "parser"):
        a = getattr(adapters, role)
        if a is not None:
            names[f"adapter_{role}"] = getattr(a, "name", type(a).__name__)
    return names


def cmd_annotate(args) -> int:
    cfg = _config_from_args(args)
    _meta, segs = pipeline.read_jsonl(_require_input(cfg))
    adapters = pipeline.adapters_from_config(cfg, mock_fallback=args.mock)
    rows, sidecar = pipeline.annotate_corpus(segs, cfg, adapters)
    prov = _provenance(cfg, "annotate", **_adapter_names(adapters))
    out = _out(cfg, "vertical.tsv.gz")
    write_table(rows, "vertical", out, provenance=prov)
    side_out = _out(cfg, "sidecar.jsonl.gz")
    pipeline.write_jsonl(side_out, sidecar, meta=prov)
    print(f"wrote {out} ({len(rows)} rows) and {side_out}")
    return 0


def cmd_aggregate(args) -> int:
    cfg = _config_from_args(args)
    rows = read_table(_require_input(cfg), "vertical")
    sidecar = None
    if args.sidecar:
        _meta, sidecar = pipeline.read_jsonl(args.sidecar)
    longs, wides = pipeline.aggregate_rows(rows, sidecar, cfg)
    prov = _provenance(cfg, "aggregate")
    long_out = _out(cfg, "long.tsv.gz")
    wide_out = _out(cfg, "wide.tsv.gz")
    write_table(longs, "long", long_out, provenance=prov)
    write_table(wides, "wide", wide_out, provenance=prov)
    print(f"wrote {long_out} ({len(longs)} rows) and {wide_out} ({len(wides)} rows)")
    return 0


def _load_documents(path) -> list:
    _meta, records = pipeline.read_jsonl(path)
    docs = []
    for rec in records:
        segments = [ParallelSegment(**s) for s in rec.pop("segments", [])]
        docs.append(build.DocumentPair(segments=segments, **rec))
    return docs


def cmd_build(args) -> int:
    cfg = _config_from_args(args)
    written = _load_documents(_require_input(cfg))
    spoken = _load_documents(args.spoken) if args.spoken else []

    kept = []
    reports = []
    for doc in written:
        doc, report = build.filter_empty_segments(doc, mode="wr")
        reports.append(report)
        if doc is not None:
            kept.append(doc)
    cutoffs = {"de-en": cfg.score_cutoff_deen, "en-de": cfg.score_cutoff_ende}
    by_dir = {}
    for doc in kept:
        by_dir.setdefault(doc.lpair, []).append(doc)
    scored = []
    for direction, docs in sorted(by_dir.items()):
        scored.extend(build.filter_by_score(docs, cutoffs.get(direction, 0.0)))
    written_clean = build.remove_overlap(scored, spoken)

    spoken_sizes = {}
    for doc in spoken:
        spoken_sizes[doc.lpair] = spoken_sizes.get(doc.lpair, 0) + doc.n_segments
    if not spoken_sizes:
        spoken_sizes = {d: 0 for d in by_dir}
    splits = build.make_splits(written_clean, spoken_sizes, cfg.seed)

    prov = _provenance(cfg, "build")
    out = _out(cfg, "splits.tsv.gz")
    with pipeline.open_text(out, "w") as f:
        for key in sorted(prov):
            f.write(f"# {key}={prov[key]}\n")
        f.write("doc_id\tlpair\tsplit\tn_segments\n")
        for split_name, docs in (("test", splits.test), ("train", splits.train),
                                 ("dropped", splits.dropped)):
            for doc in sorted(docs, key=lambda d: d.doc_id):
                f.write(f"{doc.doc_id}\t{doc.lpair}\t{split_name}\t{doc.n_segments}\n")
    report_out = _out(cfg, "build_report.jsonl.gz")
    pipeline.write_jsonl(report_out, reports, meta=prov)
    print(f"wrote {out} (test {len(splits.test)}, train {len(splits.train)}, "
          f"dropped {len(splits.dropped)}) and {report_out}")
    return 0


_STATS_COLUMNS = ("mode", "lpair", "side", "ttype", "docs", "segs", "words",
                  "pct_empty", "fp", "pct_segs_with_fp", "len_mean", "len_sd",
                  "len_min", "len_max", "pct_multi_sentence")


def cmd_stats(args) -> int:
    cfg = _config_from_args(args)
    docs = _load_documents(_require_input(cfg))
    table = build.describe(docs)
    prov = _provenance(cfg, "stats")
    out = _out(cfg, "stats.tsv.gz")
    with pipeline.open_text(out, "w") as f:
        for key in sorted(prov):
            f.write(f"# {key}={prov[key]}\n")
        f.write("\t".join(_STATS_COLUMNS) + "\n")
        for row in table:
            cells = []
            for col in _STATS_COLUMNS:
                v = row.get(col)
                cells.append("NA" if v is None else
                             (repr(v) if isinstance(v, float) else str(v)))
            f.write("\t".join(cells) + "\n")
    print(f"wrote {out} ({len(table)} rows)")
    return 0


def cmd_fp_analyze(args) -> int:
    cfg = _config_from_args(args)
    rows = read_table(_require_input(cfg), "vertical")
    tgt_ttype = cfg.target_ttype()
    tgt_rows = [r for r in rows if r.ttype == tgt_ttype]
    src_rows = [r for r in rows if r.ttype == cfg.src_ttype]
    direction = cfg.lpair.upper()
    data = build_fp_dataset(tgt_rows, src_rows, direction, variant=args.variant)
    intercepts = tuple(args.random_intercepts.split(","))
    fit = fit_logistic(data, random_intercepts=intercepts)
    prov = _provenance(cfg, "fp-analyze", variant=args.variant,
                       direction=direction,
                       aic=repr(fit.aic), c=repr(fit.c), n_obs=fit.n_obs,
                       loglik=repr(fit.loglik),
                       **{f"sigma2_{k}": repr(v) for k, v in fit.variances.items()})
    out = _out(cfg, "fp_model.tsv.gz")
    with pipeline.open_text(out, "w") as f:
        for key in sorted(prov):
            f.write(f"# {key}={prov[key]}\n")
        f.write("term\testimate\tstd_error\tz\n")
        for term in ("intercept",) + tuple(PREDICTORS):
            if term not in fit.coefficients:
                continue
            est = fit.coefficients[term]
            se = fit.std_errors[term]
            z = est / se if se else float("nan")
            f.write(f"{term}\t{est!r}\t{se!r}\t{z!r}\n")
    print(f"wrote {out} (AIC {fit.aic:.2f}, C {fit.c:.3f}, n {fit.n_obs})")
    return 0


def cmd_gam(args) -> int:
    cfg = _config_from_args(args)
    longs = read_table(_require_input(cfg), "long")
    wides = read_table(args.wide, "wide")
    lm_col = f"{args.variant}_gpt_avs"
    mt_col = f"{args.variant}_mt_avs"
    mt_by_seg = {(w.tgt_doc_id, w.tgt_seg_id): getattr(w, mt_col) for w in wides}
    xs, ys = [], []
    for rec in longs:
        if rec.lang != cfg.tgt_lang:
            continue
        lm = getattr(rec, lm_col)
        mt = mt_by_seg.get((rec.doc_id, rec.seg_id))
        if lm is None or mt is None:
            continue
        if args.orientation == "lm_on_mt":
            xs.append(mt)
            ys.append(lm)
        else:
            xs.append(lm)
            ys.append(mt)
    fit = gam.fit_gam(xs, ys)
    grid_x, yhat, lower, upper = fit.curve(args.grid_points)
    prov = _provenance(cfg, "gam", variant=args.variant,
                       orientation=args.orientation, n=len(xs),
                       lam=repr(fit.lam), pseudo_r2=repr(fit.pseudo_r2),
                       edf=repr(fit.edf), gcv=repr(fit.gcv))
    out = _out(cfg, "gam_curve.tsv.gz")
    with pipeline.open_text(out, "w") as f:
        for key in sorted(prov):
            f.write(f"# {key}={prov[key]}\n")
        f.write("x\tyhat\tci_lower\tci_upper\n")
        for row in zip(grid_x, yhat, lower, upper):
            f.write("\t".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {out} (pseudo R2 {fit.pseudo_r2:.3f}, edf {fit.edf:.2f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordbits",
        description="Surprisal pipeline for parallel spoken/written corpora.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="raw parallel TSV -> clean segments")
    _add_common(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("annotate", help="clean segments -> vertical word rows")
    _add_common(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("aggregate", help="vertical rows -> long/wide tables")
    _add_common(p)
    p.add_argument("--sidecar", help="sidecar JSONL from the annotate stage")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("build", help="filter documents and cut train/test splits")
    _add_common(p)
    p.add_argument("--spoken", help="spoken documents JSONL for overlap removal")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="corpus description table")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fp-analyze", help="mixed logistic FP model")
    _add_common(p)
    p.add_argument("--variant", choices=("base", "ft"), default="base")
    p.add_argument("--random-intercepts", default="speaker_id",
                   help="comma separated grouping factors")
    p.set_defaults(func=cmd_fp_analyze)

    p = sub.add_parser("gam", help="smooth LM-vs-MT surprisal curve")
    _add_common(p)
    p.add_argument("--wide", required=True, help="wide table with MT columns")
    p.add_argument("--variant", choices=("base", "ft"), default="base")
    p.add_argument("--orientation", choices=("lm_on_mt", "mt_on_lm"),
                   default="lm_on_mt")
    p.add_argument("--grid-points", type=int, default=100)
    p.set_defaults(func=cmd_gam)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
