"""End-to-end corpus pipeline: raw parallel input -> normalized segments ->
annotated vertical rows -> long/wide aggregates.

Documents are the unit of parallelism; results are merged in doc_id order so
identical inputs and adapters give byte-identical outputs.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import align, surprisal
from .adapters import (MockCausalLM, MockEncoder, MockMT, ReplayCausalLM,
                       ReplayEncoder, ReplayMT)
from .annotate import MockParser, ReplayParser, annotate_segment
from .config import RunConfig
from .ids import IMPLIED_MODE, ItemId
from .records import SegmentPairRecord, SegmentRecord
from .standardize import standardize
from .transcripts import normalize_segment

log = logging.getLogger(__name__)

INPUT_COLUMNS = ("doc_id", "seg_id", "src_speaker_id", "tgt_speaker_id",
                 "src_raw", "tgt_raw")


@dataclass
class AdapterSet:
    lm_base: object = None  # target-language causal LM
    lm_ft: object = None
    src_lm_base: object = None  # source-language causal LM
    src_lm_ft: object = None
    mt_base: object = None
    mt_ft: object = None
    encoder: object = None
    parser: object = None


def adapters_from_config(cfg: RunConfig, mock_fallback: bool = False) -> AdapterSet:
    def lm(path):
        if path:
            return ReplayCausalLM(path)
        return MockCausalLM() if mock_fallback else None

    def mt(path):
        if path:
            return ReplayMT(path)
        return MockMT() if mock_fallback else None

    return AdapterSet(
        lm_base=lm(cfg.replay_lm_base),
        lm_ft=lm(cfg.replay_lm_ft),
        src_lm_base=lm(cfg.replay_src_lm_base),
        src_lm_ft=lm(cfg.replay_src_lm_ft),
        mt_base=mt(cfg.replay_mt_base),
        mt_ft=mt(cfg.replay_mt_ft),
        encoder=(ReplayEncoder(cfg.replay_encoder) if cfg.replay_encoder
                 else (MockEncoder() if mock_fallback else None)),
        parser=(ReplayParser(cfg.replay_parser) if cfg.replay_parser
                else (MockParser() if mock_fallback else None)),
    )


class _GzTextWriter(io.TextIOWrapper):
    """Text stream over a gzip member with mtime pinned to zero, closing the
    underlying file as well (GzipFile leaves passed-in fileobjs open)."""

    def __init__(self, path):
        self._raw = open(path, "wb")
        gz = gzip.GzipFile(filename="", fileobj=self._raw, mode="wb", mtime=0)
        super().__init__(gz, encoding="utf-8", newline="\n")

    def close(self):
        try:
            super().close()
        finally:
            self._raw.close()


def open_text(path, mode):
    if str(path).endswith(".gz"):
        if "w" in mode:
            return _GzTextWriter(path)
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def read_input_tsv(path) -> list:
    """Raw parallel input: UTF-8 TSV with INPUT_COLUMNS (extra columns such
    as alignment_score and date are carried through); empty or NA cells mean
    an empty side."""
    with open_text(path, "r") as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty input")
    header = lines[0].split("\t")
    missing = [c for c in INPUT_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"{path}: missing input columns {missing}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} cells")
        row = dict(zip(header, cells))
        for k, v in row.items():
            if v == "NA":
                row[k] = ""
        rows.append(row)
    return rows


def normalize_rows(rows, cfg: RunConfig) -> list:
    """Standardize and (for spoken mode) resolve transcript notation on both
    sides.  Returns one dict per segment with clean text, FP positions, and
    disfluency counts."""
    out = []
    for row in rows:
        seg = {"doc_id": row["doc_id"], "seg_id": row["seg_id"], "sides": {}}
        for extra in ("alignment_score", "date"):
            if row.get(extra):
                seg[extra] = row[extra]
        for side, lang in (("src", cfg.src_lang), ("tgt", cfg.tgt_lang)):
            raw = row.get(f"{side}_raw", "")
            text = standardize(raw, lang)
            if cfg.mode == "sp":
                clean, fps, counts = normalize_segment(text)
                counts_d = {"disfluencies": counts.disfluencies,
                            "fillers": counts.fillers,
                            "fillers_plus_3": counts.fillers_plus_3}
            else:
                clean, fps, counts_d = text, [], None
            seg["sides"][side] = {
                "raw": raw,
                "clean": clean,
                "fp_positions": fps,
                "counts": counts_d,
                "speaker_id": row.get(f"{side}_speaker_id") or None,
            }
        out.append(seg)
    return out


def write_jsonl(path, records, meta=None) -> None:
    with open_text(path, "w") as f:
        if meta is not None:
            f.write(json.dumps({"meta": meta}, ensure_ascii=False, sort_keys=True) + "\n")
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path):
    meta = None
    records = []
    with open_text(path, "r") as f:
        for i, line in enumerate(f):
            obj = json.loads(line)
            if i == 0 and isinstance(obj, dict) and set(obj) == {"meta"}:
                meta = obj["meta"]
                continue
            records.append(obj)
    return meta, records


def _seg_prefix(cfg: RunConfig, ttype: str, doc_id: str, seg_id: str) -> ItemId:
    return ItemId(ttype=ttype, mode=cfg.mode.upper(), src_lang=cfg.src_lang,
                  tgt_lang=cfg.tgt_lang,
                  doc_id=str(doc_id).zfill(cfg.doc_pad),
                  seg_id=str(seg_id).zfill(cfg.seg_pad),
                  explicit_mode=ttype not in IMPLIED_MODE)


def _score_words(seg, adapter, cfg: RunConfig):
    if cfg.scoring == "window":
        return surprisal.score_sliding_window(seg, adapter, cfg.window)
    return surprisal.score_segment_bounded(seg, adapter, cfg.cap)


def _word_map_from_spans(spans, emb):
    """Map encoder subword indexes to surface-word ordinals via char spans."""
    intervals = [(sp[0], sp[1], idx) for idx, sp in spans.items() if sp is not None]
    intervals.sort()
    mapping = {}
    for k, (_surface, (start, _end), _vec) in enumerate(emb):
        owner = None
        for lo, hi, idx in intervals:
            if lo <= start < hi:
                owner = idx
                break
        mapping[k] = owner
    return mapping


def _apply_surprisal(rows_by_ordinal, scoring_ordinals, scored, column):
    for ws, ordinal in zip(scored, scoring_ordinals):
        if ws.bits is None:
            continue
        setattr(rows_by_ordinal[ordinal], column, ws.bits)


def annotate_document(doc_segments, cfg: RunConfig, adapters: AdapterSet):
    """Annotate one document's segments; returns (word_rows, sidecar)."""
    rows_out = []
    sidecar = []
    for seg in doc_segments:
        doc_id, seg_id = seg["doc_id"], seg["seg_id"]
        # sidecar records must join against the padded row ids
        pad_doc = str(doc_id).zfill(cfg.doc_pad)
        pad_seg = str(seg_id).zfill(cfg.seg_pad)
        sides = {}
        for side, lang, ttype in (("src", cfg.src_lang, cfg.src_ttype),
                                  ("tgt", cfg.tgt_lang, cfg.target_ttype())):
            info = seg["sides"][side]
            prefix = _seg_prefix(cfg, ttype, doc_id, seg_id)
            parsed = annotate_segment(info["clean"], info["fp_positions"],
                                      lang, prefix, adapters.parser)
            for row in parsed.word_rows:
                row.doc_id = prefix.doc_id
                row.seg_id = prefix.seg_id
                row.lpair = cfg.lpair
                row.lang = lang
                row.mode = cfg.mode
                row.ttype = ttype
                row.speaker_id = info["speaker_id"]
                row.raw_seg = info["raw"]
            sides[side] = parsed

        src_seg, tgt_seg = sides["src"], sides["tgt"]
        src_text = src_seg.text
        # surface-word ordinal -> row, and scoring order -> ordinal
        maps = {}
        for side, parsed in sides.items():
            ordinals = {}
            scoring = []
            k = 0
            for row in parsed.word_rows:
                if row.is_expansion:
                    continue
                ordinals[k] = row
                if not row.is_fp:
                    scoring.append(k)
                k += 1
            maps[side] = (ordinals, scoring)

        jobs = []  # (adapter, side, column, mt?)
        if adapters.lm_base:
            jobs.append((adapters.lm_base, "tgt", "srp_base_gpt2", False))
        if adapters.lm_ft:
            jobs.append((adapters.lm_ft, "tgt", "srp_ft_gpt2", False))
        if adapters.src_lm_base:
            jobs.append((adapters.src_lm_base, "src", "srp_base_gpt2", False))
        if adapters.src_lm_ft:
            jobs.append((adapters.src_lm_ft, "src", "srp_ft_gpt2", False))
        if adapters.mt_base:
            jobs.append((adapters.mt_base, "tgt", "srp_base_mt", True))
        if adapters.mt_ft:
            jobs.append((adapters.mt_ft, "tgt", "srp_ft_mt", True))

        subw_sums = {}
        for adapter, side, column, is_mt in jobs:
            parsed = sides[side]
            ordinals, scoring = maps[side]
            if is_mt:
                scored = surprisal.score_mt(src_text, parsed, adapter)
                bits = surprisal.subword_bits(parsed, _MTProxy(adapter, src_text),
                                              cap=None)
            else:
                scored = _score_words(parsed, adapter, cfg)
                bits = surprisal.subword_bits(parsed, adapter, cfg.cap)
            _apply_surprisal(ordinals, scoring, scored, column)
            subw_sums[(side, column)] = (
                sum(bits) / len(bits) if bits else None)

        bleus = {}
        for name, adapter in (("base_bleu", adapters.mt_base),
                              ("ft_bleu", adapters.mt_ft)):
            if adapter and src_text.strip() and tgt_seg.text.strip():
                bleus[name] = surprisal.pseudo_bleu(src_text, tgt_seg.text, adapter)
            else:
                bleus[name] = None

        if adapters.encoder and src_seg.words and tgt_seg.words:
            src_emb = adapters.encoder.embed(src_seg.text, cfg.src_lang)
            tgt_emb = adapters.encoder.embed(tgt_seg.text, cfg.tgt_lang)
            pairs = align.subword_align([e[2] for e in src_emb],
                                        [e[2] for e in tgt_emb],
                                        cfg.align_threshold)
            links, _unaligned = align.aggregate_to_words(
                pairs,
                _word_map_from_spans(src_seg.spans, src_emb),
                _word_map_from_spans(tgt_seg.spans, tgt_emb),
                cfg.align_threshold,
                n_src_words=len(maps["src"][0]))
            src_rows, _ = maps["src"]
            tgt_rows, _ = maps["tgt"]
            reverse = {}
            for link in links:
                srow = src_rows[link.src_word_index]
                srow.aligned_word = [tgt_rows[t].token for t in link.tgt_word_indices]
                srow.aligned_word_id = [str(tgt_rows[t].word_id)
                                        for t in link.tgt_word_indices]
                for t in link.tgt_word_indices:
                    reverse.setdefault(t, []).append(link.src_word_index)
            for t, sources in reverse.items():
                trow = tgt_rows[t]
                trow.aligned_word = [src_rows[s].token for s in sorted(sources)]
                trow.aligned_word_id = [str(src_rows[s].word_id)
                                        for s in sorted(sources)]
            # the ", "-joined TSV list cannot carry surfaces that themselves
            # contain a comma; null those alignments rather than corrupt rows
            for rows_map in (src_rows, tgt_rows):
                for row in rows_map.values():
                    if row.aligned_word and any("," in t for t in row.aligned_word):
                        log.warning("comma inside aligned surface, alignment "
                                    "nulled for %s", row.word_id.render())
                        row.aligned_word = None
                        row.aligned_word_id = None

        for side in ("src", "tgt"):
            rows_out.extend(sides[side].word_rows)
            info = seg["sides"][side]
            rec = {"doc_id": pad_doc, "seg_id": pad_seg, "side": side,
                   "counts": info["counts"],
                   "n_sentences": len(sides[side].sentence_boundaries)}
            for col, key in (("srp_base_gpt2", "base_gpt_avs_subw"),
                             ("srp_ft_gpt2", "ft_gpt_avs_subw")):
                rec[key] = subw_sums.get((side, col))
            sidecar.append(rec)
        sidecar.append({"doc_id": pad_doc, "seg_id": pad_seg, "side": "pair",
                        "base_mt_avs_subw": subw_sums.get(("tgt", "srp_base_mt")),
                        "ft_mt_avs_subw": subw_sums.get(("tgt", "srp_ft_mt")),
                        **bleus})
    return rows_out, sidecar


class _MTProxy:
    """Adapts MTAdapter.score(src, tgt) to the single-text score() shape used
    by the subword aggregation helper."""

    def __init__(self, mt, src_text):
        self.mt = mt
        self.src_text = src_text
        self.name = getattr(mt, "name", "mt")

    def score(self, text):
        return self.mt.score(self.src_text, text)


def annotate_corpus(segments, cfg: RunConfig, adapters: AdapterSet):
    """Document-sharded annotation; deterministic doc_id-ordered merge."""
    by_doc = {}
    for seg in segments:
        by_doc.setdefault(seg["doc_id"], []).append(seg)
    doc_ids = sorted(by_doc)
    workers = cfg.workers or os.cpu_count() or 1
    results = {}
    if workers == 1 or len(doc_ids) <= 1:
        for d in doc_ids:
            results[d] = annotate_document(by_doc[d], cfg, adapters)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for d, res in zip(doc_ids, pool.map(
                    lambda d: annotate_document(by_doc[d], cfg, adapters), doc_ids)):
                results[d] = res
    rows = []
    sidecar = []
    for d in doc_ids:
        r, s = results[d]
        rows.extend(r)
        sidecar.extend(s)
    return rows, sidecar


def _mean_or_none(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate_rows(word_rows, sidecar=None, cfg: RunConfig = None):
    """Vertical rows (+ optional sidecar) -> (long records, wide records).

    Subword-level averages and BLEU live only in the sidecar; without it
    those columns stay null.
    """
    side_info = {}
    pair_info = {}
    for rec in sidecar or []:
        key = (str(rec["doc_id"]), str(rec["seg_id"]))
        if rec.get("side") == "pair":
            pair_info[key] = rec
        else:
            side_info[key + (rec["side"],)] = rec

    groups = {}
    order = []
    for row in word_rows:
        key = (row.doc_id, row.seg_id, row.lang, row.ttype)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)

    longs = []
    wides = {}
    wide_order = []
    for key in order:
        doc_id, seg_id, lang, ttype = key
        rows = groups[key]
        surface = [r for r in rows if not r.is_expansion]
        word = [r for r in surface if not r.is_fp]
        is_src = ttype == (cfg.src_ttype if cfg else "ORG")
        side = "src" if is_src else "tgt"
        info = side_info.get((str(doc_id), str(seg_id), side), {})
        counts = info.get("counts") or {}
        rec = SegmentRecord(
            doc_id=doc_id, seg_id=seg_id,
            lpair=rows[0].lpair, lang=lang, mode=rows[0].mode, ttype=ttype,
            speaker_id=rows[0].speaker_id,
            base_gpt_avs=_mean_or_none([r.srp_base_gpt2 for r in word]),
            base_gpt_avs_subw=info.get("base_gpt_avs_subw"),
            ft_gpt_avs=_mean_or_none([r.srp_ft_gpt2 for r in word]),
            ft_gpt_avs_subw=info.get("ft_gpt_avs_subw"),
            disfluencies=counts.get("disfluencies"),
            fillers=counts.get("fillers"),
            fillers_plus_3=counts.get("fillers_plus_3"),
            raw_seg=rows[0].raw_seg,
            tokens=[r.token for r in surface],
            wc_tok=len(word),
        )
        longs.append(rec)

        wkey = (doc_id, seg_id)
        if wkey not in wides:
            wides[wkey] = SegmentPairRecord(src_doc_id=doc_id, src_seg_id=seg_id,
                                            tgt_doc_id=doc_id, tgt_seg_id=seg_id,
                                            lpair=rows[0].lpair, mode=rows[0].mode)
            wide_order.append(wkey)
        wide = wides[wkey]
        if side == "src":
            wide.src_raw_seg = rows[0].raw_seg
        else:
            wide.tgt_raw_seg = rows[0].raw_seg
            wide.base_mt_avs = _mean_or_none([r.srp_base_mt for r in word])
            wide.ft_mt_avs = _mean_or_none([r.srp_ft_mt for r in word])
            pair = pair_info.get((str(doc_id), str(seg_id)), {})
            wide.base_mt_avs_subw = pair.get("base_mt_avs_subw")
            wide.ft_mt_avs_subw = pair.get("ft_mt_avs_subw")
            wide.base_bleu = pair.get("base_bleu")
            wide.ft_bleu = pair.get("ft_bleu")
    return longs, [wides[k] for k in wide_order]
