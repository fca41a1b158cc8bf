"""Parser-adapter orchestration: FP removal/reinsertion, continuous word
numbering across sentences, multitoken dual representation, and character
spans for downstream realignment.

The parser never sees filler particles.  FPs are stripped from the clean
text, the remainder is parsed as raw text, and FP rows are reinserted at
their original positions with pos == "FP" and nulls everywhere else.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .adapters import AdapterError, _ReplayBase
from .records import WordRow
from .transcripts import FP_FORMS

log = logging.getLogger(__name__)

_CONLLU_KEYS = ("id", "form", "lemma", "upos", "xpos", "feats",
                "head", "deprel", "deps", "misc")


@dataclass
class ConlluToken:
    id: str  # "3" or a multiword range "1-2"
    form: str
    lemma: str = None
    upos: str = None
    xpos: str = None
    feats: str = None
    head: int = None
    deprel: str = None
    deps: str = None
    misc: str = None

    @property
    def is_range(self) -> bool:
        return "-" in self.id

    def range_span(self):
        a, b = self.id.split("-", 1)
        return int(a), int(b)


def _to_token(rec) -> ConlluToken:
    if isinstance(rec, ConlluToken):
        return rec
    kw = {k: rec.get(k) for k in _CONLLU_KEYS if rec.get(k) is not None}
    if "head" in kw:
        kw["head"] = int(kw["head"])
    return ConlluToken(**kw)


class ReplayParser(_ReplayBase):
    """Replays recorded parses: one request per (text, lang), response is a
    list of sentences, each a list of CoNLL-U token records."""

    kind = "parser"

    def annotate(self, text: str, lang: str):
        sentences = self._lookup({"text": text, "lang": lang})
        return [[_to_token(rec) for rec in sent] for sent in sentences]


class MockParser:
    """Deterministic toy parser good enough for pipeline tests: splits
    trailing punctuation, expands common English contractions as multiword
    tokens, ends a sentence at .!? and hangs every token off the first word."""

    kind = "parser"
    name = "mock-parser"

    _CONTRACTIONS = ("'s", "'re", "'ve", "'ll", "'d", "'m", "n't")

    def _split(self, text: str):
        toks = []
        for ws in text.split():
            left = ws
            trail = []
            while left and left[-1] in ".,;:!?…)\"'" and not (
                    len(left) >= 2 and left[-2] in ".," and left[-1] == "."):
                trail.append(left[-1])
                left = left[:-1]
            if left:
                toks.append(left)
            toks.extend(reversed(trail))
        return toks

    def annotate(self, text: str, lang: str):
        sentences = []
        current = []
        for tok in self._split(text):
            current.append(tok)
            if tok in (".", "!", "?"):
                sentences.append(current)
                current = []
        if current:
            sentences.append(current)

        out = []
        for sent in sentences:
            rows = []
            idx = 0
            root = None
            for tok in sent:
                contraction = None
                if lang == "EN":
                    for suf in self._CONTRACTIONS:
                        if len(tok) > len(suf) and tok.lower().endswith(suf):
                            contraction = (tok[:-len(suf)], tok[-len(suf):])
                            break
                parts = [tok] if contraction is None else list(contraction)
                if contraction is not None:
                    rows.append(ConlluToken(f"{idx + 1}-{idx + 2}", tok))
                for part in parts:
                    idx += 1
                    punct = all(not c.isalnum() for c in part)
                    if root is None and not punct:
                        root = idx
                    rows.append(ConlluToken(
                        str(idx), part, lemma=part.lower(),
                        upos="PUNCT" if punct else ("NUM" if part[0].isdigit() else "X"),
                        head=0 if idx == root else (root or 0),
                        deprel="root" if idx == root else ("punct" if punct else "dep")))
            out.append(rows)
        return out


@dataclass
class TokenizedSegment:
    word_rows: list = field(default_factory=list)
    fp_positions: list = field(default_factory=list)  # surface-word indices
    sentence_boundaries: list = field(default_factory=list)
    text: str = ""  # detokenized parser input (FPs absent)
    words: list = field(default_factory=list)  # non-FP surface tokens, parser order
    spans: dict = field(default_factory=dict)  # surface-word index -> (start, end)
    parsed: bool = True

    def scoring_words(self):
        return self.words


def surface_map(seg: TokenizedSegment) -> dict:
    """Surface-word index -> character span in seg.text (None for FP rows)."""
    return dict(seg.spans)


def validate_sentence_tree(tokens) -> list:
    """Check one sentence's dependency structure: integer ids 1..n, head ids
    in range, exactly one root, no cycles.  Returns a list of problems."""
    problems = []
    words = [t for t in tokens if not t.is_range]
    ids = [int(t.id) for t in words]
    if ids != list(range(1, len(words) + 1)):
        problems.append(f"non-contiguous ids {ids}")
    heads = {}
    roots = 0
    for t in words:
        if t.head is None:
            problems.append(f"token {t.id} has no head")
            continue
        if t.head == 0:
            roots += 1
        elif t.head not in ids:
            problems.append(f"token {t.id} head {t.head} out of range")
        heads[int(t.id)] = t.head
    if roots != 1:
        problems.append(f"{roots} roots")
    for start in heads:
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                problems.append(f"cycle through token {start}")
                break
            seen.add(node)
            node = heads.get(node, 0)
    return problems


def _surface_rows(sentences):
    """Flatten sentences into (sent_idx, surface ConlluToken, expansions)."""
    out = []
    for si, sent in enumerate(sentences):
        i = 0
        while i < len(sent):
            tok = sent[i]
            if tok.is_range:
                lo, hi = tok.range_span()
                n = hi - lo + 1
                out.append((si, tok, sent[i + 1:i + 1 + n]))
                i += 1 + n
            else:
                out.append((si, tok, []))
                i += 1
    return out


def _map_to_ws_tokens(surfaces, ws_tokens, raw_seg):
    """Assign each parsed surface form the index of the whitespace token its
    first character falls in.  The parser must not invent or drop characters;
    anything else raises AdapterError."""
    target = "".join(ws_tokens)
    starts = []
    pos = 0
    for i, t in enumerate(ws_tokens):
        starts.append((pos, pos + len(t), i))
        pos += len(t)
    cursor = 0
    owners = []
    for form in surfaces:
        key = form.replace(" ", "")
        if target[cursor:cursor + len(key)] != key:
            raise AdapterError(
                f"parsed token {form!r} does not match segment text at offset "
                f"{cursor} ({raw_seg[:60]!r}...)")
        owner = next(i for lo, hi, i in starts if lo <= cursor < hi)
        owners.append(owner)
        cursor += len(key)
    if cursor != len(target):
        raise AdapterError("parse did not cover the full segment text")
    return owners


def detokenize(tokens) -> str:
    return " ".join(tokens)


def annotate_segment(clean_text: str, fp_positions, lang: str, ids,
                     adapter) -> TokenizedSegment:
    """Parse one clean segment into WordRow skeletons.

    clean_text is the normalized segment with FPs still present at the
    whitespace-token indices in fp_positions; ids is an ItemId prefix with
    doc and seg set.  Surprisal and alignment columns are filled later.
    """
    ws_tokens = clean_text.split()
    fp_set = set(fp_positions or [])
    for p in fp_set:
        if ws_tokens[p].casefold() not in FP_FORMS:
            raise ValueError(f"fp position {p} points at {ws_tokens[p]!r}")
    scored_tokens = [t for i, t in enumerate(ws_tokens) if i not in fp_set]
    text = detokenize(scored_tokens)

    def fp_row(ws_index):
        return WordRow(word_id=ids, token=ws_tokens[ws_index].casefold(), pos="FP")

    try:
        if text:
            sentences = adapter.annotate(text, lang)
        else:
            sentences = []
        surfaces = _surface_rows(sentences)
        owners = _map_to_ws_tokens([s.form for _, s, _ in surfaces],
                                   scored_tokens, clean_text)
        parsed = True
    except Exception as exc:
        log.warning("parser %s failed on %r: %s; keeping token-only rows",
                    getattr(adapter, "name", adapter), clean_text[:60], exc)
        surfaces = [(0, ConlluToken("0", tok), []) for tok in scored_tokens]
        owners = list(range(len(scored_tokens)))
        parsed = False

    # owners index scored_tokens; translate to positions among all ws tokens
    scored_ws = [i for i in range(len(ws_tokens)) if i not in fp_set]
    owners = [scored_ws[o] for o in owners]

    # interleave FP rows before the first parsed token at or past them
    merged = []  # (kind, payload)
    fp_iter = sorted(fp_set)
    fi = 0
    for entry, owner in zip(surfaces, owners):
        while fi < len(fp_iter) and fp_iter[fi] < owner:
            merged.append(("fp", fp_iter[fi]))
            fi += 1
        merged.append(("tok", entry))
    while fi < len(fp_iter):
        merged.append(("fp", fp_iter[fi]))
        fi += 1

    seg = TokenizedSegment(text=text, parsed=parsed)
    ordinal = 0
    last_sent = None
    cursor = 0
    for kind, payload in merged:
        if kind == "fp":
            row = fp_row(payload)
            row.word_id = ids.with_word(f"{ordinal + 1:03d}")
            seg.word_rows.append(row)
            seg.fp_positions.append(ordinal)
            seg.spans[ordinal] = None
            ordinal += 1
            continue
        si, tok, expansions = payload
        if si != last_sent:
            seg.sentence_boundaries.append(ordinal)
            last_sent = si
        try:
            start = text.index(tok.form, cursor)
        except ValueError:
            log.warning("could not place %r in %r, span dropped", tok.form, text[:60])
            span = None
        else:
            span = (start, start + len(tok.form))
            cursor = span[1]
        seg.spans[ordinal] = span
        seg.words.append(tok.form)
        surface = WordRow(
            word_id=ids.with_word(f"{ordinal + 1:03d}"),
            id=None if not parsed else (None if expansions else int(tok.id)),
            token=tok.form,
        )
        if parsed and not expansions:
            surface.lemma = tok.lemma
            surface.pos = tok.upos
            surface.xpos = tok.xpos
            surface.feats = tok.feats
            surface.head_id = tok.head
            surface.rel = tok.deprel
            surface.deps = tok.deps
            surface.misc = tok.misc
        seg.word_rows.append(surface)
        for k, exp in enumerate(expansions, start=1):
            seg.word_rows.append(WordRow(
                word_id=ids.with_word(f"{ordinal + 1:03d}", k),
                id=int(exp.id), token=exp.form, lemma=exp.lemma, pos=exp.upos,
                xpos=exp.xpos, feats=exp.feats, head_id=exp.head,
                rel=exp.deprel, deps=exp.deps, misc=exp.misc))
        ordinal += 1
    return seg
