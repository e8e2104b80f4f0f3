"""Data model, corpus TSV format, and concept-label transformations.

A corpus is a sequence of utterances; each utterance is a sequence of
tokens carrying lexical, syntactic, semantic-category and confidence
annotations plus one concept label per word.  Concept spans are encoded
with B-/I- prefixes over concept names so that labelled segments can be
recovered exactly; `null` marks words conveying no domain information.
Two extra labels, ERROR-C and ERROR-N, replace the regular label of
erroneous recognizer words during training and are mapped back to null
before scoring.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

NULL_LABEL = "null"
ERROR_C = "ERROR-C"
ERROR_N = "ERROR-N"
ERROR_LABELS = (ERROR_C, ERROR_N)

FLAG_CORRECT = "correct"
FLAG_ERROR = "error"

ABSENT = "_"

COLUMNS = (
    "INDEX", "SURFACE", "LEMMA", "POS", "GOV", "DEPREL",
    "SEMCATS", "PAP", "CONF", "ERRFLAG", "LABEL",
)


class CorpusError(Exception):
    """Base class for corpus file and invariant failures."""


class ParseError(CorpusError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(CorpusError):
    """A row parsed but violates a corpus invariant."""


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str | None = None
    pos: str | None = None
    governor: int | None = None
    deprel: str | None = None
    sem_categories: frozenset = frozenset()
    pap: float | None = None
    mlp_conf: float | None = None
    error_flag: str | None = None
    label: str | None = None

    def __post_init__(self):
        if not self.surface:
            raise SchemaError("token surface must be non-empty")
        for name in ("pap", "mlp_conf"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise SchemaError(f"{name}={v} outside [0,1]")
        if self.error_flag not in (None, FLAG_CORRECT, FLAG_ERROR):
            raise SchemaError(f"bad error flag {self.error_flag!r}")


@dataclass(frozen=True)
class Utterance:
    id: str
    tokens: tuple
    reference_tokens: tuple | None = None

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise SchemaError(f"utterance {self.id!r} has no tokens")
        for i, tok in enumerate(self.tokens):
            g = tok.governor
            if g is not None and (g == i or not 0 <= g < len(self.tokens)):
                raise SchemaError(
                    f"utterance {self.id!r}: token {i} has invalid governor {g}"
                )

    def __len__(self):
        return len(self.tokens)

    def surfaces(self):
        return [t.surface for t in self.tokens]

    def labels(self):
        return [t.label for t in self.tokens]

    def with_labels(self, labels) -> "Utterance":
        if len(labels) != len(self.tokens):
            raise SchemaError("label count does not match token count")
        toks = tuple(replace(t, label=lab) for t, lab in zip(self.tokens, labels))
        return replace(self, tokens=toks)


@dataclass(frozen=True)
class Dataset:
    utterances: tuple = ()

    def __post_init__(self):
        ids = [u.id for u in self.utterances]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate utterance ids: {dup[:3]}")

    def __iter__(self):
        return iter(self.utterances)

    def __len__(self):
        return len(self.utterances)

    def by_id(self):
        return {u.id: u for u in self.utterances}

    def n_tokens(self):
        return sum(len(u) for u in self.utterances)


@dataclass(frozen=True)
class LabelScheme:
    """Concept inventory plus the null and error tags."""

    concepts: frozenset
    null_label: str = NULL_LABEL
    error_labels: tuple = ERROR_LABELS

    def labels(self, include_errors=False):
        out = [self.null_label]
        for c in sorted(self.concepts):
            out.append("B-" + c)
            out.append("I-" + c)
        if include_errors:
            out.extend(self.error_labels)
        return out

    def is_valid(self, label: str) -> bool:
        if label == self.null_label or label in self.error_labels:
            return True
        if label.startswith(("B-", "I-")):
            return label[2:] in self.concepts
        return False


@dataclass(frozen=True)
class ConceptSegment:
    label: str
    value: str
    start: int
    end: int  # exclusive


@dataclass(frozen=True)
class TaggerOutput:
    """Per-word label sequence for one utterance from one system."""

    id: str
    labels: tuple

    def __len__(self):
        return len(self.labels)


def scheme_of(dataset: Dataset) -> LabelScheme:
    """Infer the concept inventory from the labels present in a dataset."""
    concepts = set()
    for utt in dataset:
        for tok in utt.tokens:
            lab = tok.label
            if lab and lab.startswith(("B-", "I-")):
                concepts.add(lab[2:])
    return LabelScheme(frozenset(concepts))


def validate_label_sequence(labels, line_base=None):
    """Reject I-x labels that do not continue a B-x/I-x run."""
    prev = None
    for i, lab in enumerate(labels):
        if lab is not None and lab.startswith("I-"):
            if prev is None or prev[2:] != lab[2:] or not prev.startswith(("B-", "I-")):
                where = f" (row {i})" if line_base is None else f" (line {line_base + i})"
                raise SchemaError(f"label {lab!r} does not continue a segment{where}")
        prev = lab


def repair_bio(labels):
    """Promote orphan I-x labels to B-x so the sequence is segmentable."""
    out = list(labels)
    prev = None
    for i, lab in enumerate(out):
        if lab is not None and lab.startswith("I-"):
            if prev is None or not prev.startswith(("B-", "I-")) or prev[2:] != lab[2:]:
                out[i] = "B-" + lab[2:]
        prev = out[i]
    return out


def _normalize_span(words, value_table):
    """Greedy longest-match lookup of `words` in a phrase->value table."""
    if not value_table:
        return " ".join(w.lower() for w in words)
    keys = {tuple(k.split()) for k in value_table}
    max_len = max(len(k) for k in keys)
    lowered = [w.lower() for w in words]
    out = []
    i = 0
    while i < len(lowered):
        for n in range(min(max_len, len(lowered) - i), 0, -1):
            phrase = tuple(lowered[i:i + n])
            if phrase in keys:
                out.append(value_table[" ".join(phrase)])
                i += n
                break
        else:
            out.append(lowered[i])
            i += 1
    return " ".join(out)


def segments_of(utterance: Utterance, value_table=None):
    """Decode maximal B/I runs into concept segments.

    The value is the normalized form of the span: phrase lookup in
    `value_table` where possible, lowercased surface otherwise.  Error
    labels must have been stripped upstream.
    """
    segments = []
    start = None
    concept = None

    def close(end):
        nonlocal start, concept
        if start is not None:
            words = [t.surface for t in utterance.tokens[start:end]]
            segments.append(ConceptSegment(concept, _normalize_span(words, value_table), start, end))
        start, concept = None, None

    for i, tok in enumerate(utterance.tokens):
        lab = tok.label
        if lab in ERROR_LABELS:
            raise SchemaError(f"error label {lab!r} present; strip before segmenting")
        if lab is None or lab == NULL_LABEL:
            close(i)
        elif lab.startswith("B-"):
            close(i)
            start, concept = i, lab[2:]
        elif lab.startswith("I-"):
            if concept != lab[2:]:
                raise SchemaError(f"orphan {lab!r} at position {i}; repair first")
        else:
            raise SchemaError(f"unknown label {lab!r}")
    close(len(utterance.tokens))
    return segments


def labels_for_segments(segments, n_tokens):
    """Inverse of `segments_of` up to values: B/I labels over n positions."""
    labels = [NULL_LABEL] * n_tokens
    for seg in segments:
        if not (0 <= seg.start < seg.end <= n_tokens):
            raise SchemaError(f"segment span [{seg.start},{seg.end}) out of range")
        labels[seg.start] = "B-" + seg.label
        for i in range(seg.start + 1, seg.end):
            labels[i] = "I-" + seg.label
    return labels


def augment_error_labels(utterance: Utterance) -> Utterance:
    """Replace the label of every erroneous word with an error tag.

    An erroneous word standing where the reference carried a concept
    (its projected label is non-null) becomes ERROR-C; erroneous words
    aligned to null or inserted become ERROR-N.  Correct words keep
    their label.  Orphaned I-x continuations left behind are promoted
    to B-x so the result is still segmentable.
    """
    labels = []
    for i, tok in enumerate(utterance.tokens):
        if tok.error_flag is None:
            raise SchemaError(f"token {i} of {utterance.id!r} lacks an error flag")
        if tok.label is None:
            raise SchemaError(f"token {i} of {utterance.id!r} lacks a projected label")
        if tok.error_flag == FLAG_ERROR:
            labels.append(ERROR_C if tok.label != NULL_LABEL else ERROR_N)
        else:
            labels.append(tok.label)
    return utterance.with_labels(repair_bio(labels))


def strip_error_labels(output: TaggerOutput) -> TaggerOutput:
    """Map ERROR-C/ERROR-N to null; every other label is untouched."""
    labels = tuple(NULL_LABEL if lab in ERROR_LABELS else lab for lab in output.labels)
    return TaggerOutput(output.id, labels)


# ---------------------------------------------------------------------------
# TSV corpus format: one token per row, "# id=<text>" headers, blank line
# between utterances, "_" for absent fields, SEMCATS "|"-joined, UTF-8.
# ---------------------------------------------------------------------------

def _fmt_conf(v):
    return ABSENT if v is None else f"{v:.6f}"


def _token_row(i, tok: Token) -> str:
    cats = "|".join(sorted(tok.sem_categories)) if tok.sem_categories else ABSENT
    cells = (
        str(i),
        tok.surface,
        tok.lemma if tok.lemma is not None else ABSENT,
        tok.pos if tok.pos is not None else ABSENT,
        str(tok.governor) if tok.governor is not None else ABSENT,
        tok.deprel if tok.deprel is not None else ABSENT,
        cats,
        _fmt_conf(tok.pap),
        _fmt_conf(tok.mlp_conf),
        tok.error_flag if tok.error_flag is not None else ABSENT,
        tok.label if tok.label is not None else ABSENT,
    )
    return "\t".join(cells)


def format_dataset(dataset: Dataset) -> str:
    parts = []
    for utt in dataset:
        parts.append(f"# id={utt.id}\n")
        for i, tok in enumerate(utt.tokens):
            parts.append(_token_row(i, tok) + "\n")
        parts.append("\n")
    return "".join(parts)


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_dataset(dataset))


def _parse_opt(cell, caster, what, line):
    if cell == ABSENT:
        return None
    try:
        return caster(cell)
    except ValueError as exc:
        raise ParseError(f"bad {what} {cell!r}", line) from exc


def read_dataset(path, columns=COLUMNS) -> Dataset:
    """Parse a corpus TSV, validating every invariant on the way in.

    Missing fields stay absent (they are never defaulted to zero).
    Raises ParseError with the offending line number for malformed rows
    and SchemaError for invariant violations such as an I-x label that
    does not continue a segment.
    """
    if tuple(columns) != COLUMNS:
        raise ValueError(f"unsupported column spec {columns!r}")
    utterances = []
    cur_id = None
    rows = []
    first_row_line = None

    def flush(line):
        nonlocal cur_id, rows, first_row_line
        if cur_id is None:
            return
        if not rows:
            raise ParseError(f"utterance {cur_id!r} has no tokens", line)
        labels = [t.label for t in rows]
        try:
            validate_label_sequence(labels, line_base=first_row_line)
        except SchemaError as exc:
            raise SchemaError(f"utterance {cur_id!r}: {exc}") from exc
        try:
            utterances.append(Utterance(cur_id, tuple(rows)))
        except SchemaError as exc:
            raise SchemaError(f"utterance {cur_id!r}: {exc}") from exc
        cur_id, rows, first_row_line = None, [], None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith("# id="):
                flush(lineno)
                cur_id = line[len("# id="):]
                if not cur_id:
                    raise ParseError("empty utterance id", lineno)
                continue
            if cur_id is None:
                raise ParseError("token row before any '# id=' header", lineno)
            cells = line.split("\t")
            if len(cells) != len(COLUMNS):
                raise ParseError(
                    f"expected {len(COLUMNS)} columns, found {len(cells)}", lineno)
            idx = _parse_opt(cells[0], int, "index", lineno)
            if idx != len(rows):
                raise ParseError(f"index {cells[0]} out of order", lineno)
            if first_row_line is None:
                first_row_line = lineno
            cats = frozenset(cells[6].split("|")) if cells[6] != ABSENT else frozenset()
            try:
                tok = Token(
                    surface=cells[1],
                    lemma=None if cells[2] == ABSENT else cells[2],
                    pos=None if cells[3] == ABSENT else cells[3],
                    governor=_parse_opt(cells[4], int, "governor", lineno),
                    deprel=None if cells[5] == ABSENT else cells[5],
                    sem_categories=cats,
                    pap=_parse_opt(cells[7], float, "pap", lineno),
                    mlp_conf=_parse_opt(cells[8], float, "confidence", lineno),
                    error_flag=None if cells[9] == ABSENT else cells[9],
                    label=None if cells[10] == ABSENT else cells[10],
                )
            except SchemaError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            rows.append(tok)
        flush(None)
    return Dataset(tuple(utterances))


# ---------------------------------------------------------------------------
# Tagger output files: "# id=<text>" then one label per line.
# ---------------------------------------------------------------------------

def write_outputs(outputs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for out in outputs:
            fh.write(f"# id={out.id}\n")
            for lab in out.labels:
                fh.write(lab + "\n")
            fh.write("\n")


def read_outputs(path):
    outputs = []
    cur_id = None
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                if cur_id is not None:
                    outputs.append(TaggerOutput(cur_id, tuple(labels)))
                    cur_id, labels = None, []
                continue
            if line.startswith("# id="):
                if cur_id is not None:
                    outputs.append(TaggerOutput(cur_id, tuple(labels)))
                    labels = []
                cur_id = line[len("# id="):]
                continue
            if cur_id is None:
                raise ParseError("label before any '# id=' header", lineno)
            labels.append(line)
    if cur_id is not None:
        outputs.append(TaggerOutput(cur_id, tuple(labels)))
    return outputs
