"""Edit alignment, WER, a stochastic recognizer channel, and confusion
networks with word posteriors.

The channel replaces a real recognizer: per reference word it may
substitute (preferring phonetically near candidates), delete, or insert,
at configured rates, so the overall word error rate is steerable.  An
n-best list around a hypothesis feeds a pivot-aligned confusion network
whose bin posteriors give the word posterior (pap) confidence measure.
Everything is keyed by (seed, utterance id), so corpus-parallel runs are
bit-identical to serial ones.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .corpus import (FLAG_CORRECT, FLAG_ERROR, NULL_LABEL, Token, Utterance,
                     repair_bio)
from .numutil import derived_seed

EPS = "<eps>"

MATCH, SUB, DEL, INS = "match", "substitution", "deletion", "insertion"
# preference on equal cost, applied while backtracking
_OP_RANK = {MATCH: 0, SUB: 1, DEL: 2, INS: 3}


class AlignmentError(Exception):
    pass


@dataclass(frozen=True)
class Alignment:
    ops: tuple  # of (op, ref_index or None, hyp_index or None)
    cost: float

    def counts(self):
        c = {MATCH: 0, SUB: 0, DEL: 0, INS: 0}
        for op, _, _ in self.ops:
            c[op] += 1
        return c


def align(ref, hyp, costs=(1.0, 1.0, 1.0)) -> Alignment:
    """Minimal-cost alignment of two sequences.

    costs = (substitution, insertion, deletion).  Ties are broken by
    preferring match > substitution > deletion > insertion.
    """
    sub_c, ins_c, del_c = costs
    n, m = len(ref), len(hyp)
    INF = float("inf")
    dist = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = dist[i - 1][0] + del_c
    for j in range(1, m + 1):
        dist[0][j] = dist[0][j - 1] + ins_c
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0.0 if ref[i - 1] == hyp[j - 1] else sub_c)
            row[j] = min(diag, prev[j] + del_c, row[j - 1] + ins_c)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        cands = []
        if i > 0 and j > 0:
            if ref[i - 1] == hyp[j - 1] and math.isclose(dist[i][j], dist[i - 1][j - 1]):
                cands.append((MATCH, i - 1, j - 1))
            elif ref[i - 1] != hyp[j - 1] and math.isclose(dist[i][j], dist[i - 1][j - 1] + sub_c):
                cands.append((SUB, i - 1, j - 1))
        if i > 0 and math.isclose(dist[i][j], dist[i - 1][j] + del_c):
            cands.append((DEL, i - 1, None))
        if j > 0 and math.isclose(dist[i][j], dist[i][j - 1] + ins_c):
            cands.append((INS, None, j - 1))
        op = min(cands, key=lambda c: _OP_RANK[c[0]])
        ops.append(op)
        if op[0] in (MATCH, SUB):
            i, j = i - 1, j - 1
        elif op[0] == DEL:
            i -= 1
        else:
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), dist[n][m])


def wer(ref, hyp) -> float:
    """100 * (S + D + I) / |ref| under unit edit costs."""
    if len(ref) < 1:
        raise AlignmentError("WER undefined for an empty reference")
    c = align(ref, hyp).counts()
    return 100.0 * (c[SUB] + c[DEL] + c[INS]) / len(ref)


# ---------------------------------------------------------------------------
# Noise channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseConfig:
    """Stochastic recognizer channel.

    The expected WER is 100 * (sub + del + ins) since each event makes
    exactly one edit against the reference.  `nbest_correlation` is the
    probability that a secondary decode keeps the primary decode's
    decision at a position, standing in for the acoustic correlation
    that makes real n-best lists agree on their mistakes.
    """

    sub_rate: float = 0.156
    del_rate: float = 0.046
    ins_rate: float = 0.036
    confusions: dict | None = None
    vocabulary: tuple = ()
    insertion_words: tuple = ()
    seed: int = 0
    nbest_correlation: float = 0.72

    def __post_init__(self):
        for name in ("sub_rate", "del_rate", "ins_rate"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise AlignmentError(f"{name}={v} outside [0,1)")
        if self.sub_rate + self.del_rate + self.ins_rate >= 1.0:
            raise AlignmentError("substitution+deletion+insertion rates must sum below 1")
        if not 0.0 <= self.nbest_correlation <= 1.0:
            raise AlignmentError("nbest_correlation outside [0,1]")

    @property
    def target_wer(self) -> float:
        return 100.0 * (self.sub_rate + self.del_rate + self.ins_rate)


def _substitute(word, cfg: NoiseConfig, rng) -> str:
    cands = (cfg.confusions or {}).get(word)
    if not cands:
        cands = [w for w in cfg.vocabulary if w != word]
    if not cands:
        return word + "'"  # degenerate configs still must change the word
    return cands[rng.randrange(len(cands))]


def _insertion_word(cfg: NoiseConfig, rng) -> str:
    pool = cfg.insertion_words or cfg.vocabulary or ("euh",)
    return pool[rng.randrange(len(pool))]


def _channel_decisions(words, cfg: NoiseConfig, rng):
    """One channel draw as per-reference-position decisions.

    Each decision is ("keep",) | ("sub", word) | ("del",), optionally
    followed by an inserted word recorded separately per gap.
    """
    decisions, inserts = [], []
    for w in words:
        u = rng.random()
        if u < cfg.del_rate:
            decisions.append(("del",))
        elif u < cfg.del_rate + cfg.sub_rate:
            decisions.append(("sub", _substitute(w, cfg, rng)))
        else:
            decisions.append(("keep",))
        inserts.append(_insertion_word(cfg, rng) if rng.random() < cfg.ins_rate else None)
    return decisions, inserts


def _decisions_logprob(decisions, inserts, cfg: NoiseConfig) -> float:
    keep_p = 1.0 - cfg.sub_rate - cfg.del_rate
    logp = 0.0
    for dec in decisions:
        if dec[0] == "del":
            logp += math.log(cfg.del_rate) if cfg.del_rate > 0 else -1e9
        elif dec[0] == "sub":
            logp += math.log(cfg.sub_rate) if cfg.sub_rate > 0 else -1e9
        else:
            logp += math.log(keep_p)
    for ins in inserts:
        if ins is None:
            logp += math.log(1.0 - cfg.ins_rate) if cfg.ins_rate < 1 else -1e9
        else:
            logp += math.log(cfg.ins_rate) if cfg.ins_rate > 0 else -1e9
    return logp


def _emit(words, decisions, inserts):
    out = []
    for w, dec, ins in zip(words, decisions, inserts):
        if dec[0] == "keep":
            out.append(w)
        elif dec[0] == "sub":
            out.append(dec[1])
        for extra in ([ins] if ins else []):
            out.append(extra)
    return out


def _hyp_utterance(utt: Utterance, hyp_words) -> Utterance:
    """Wrap channel output as an utterance; flags come from the alignment."""
    if not hyp_words:
        hyp_words = ["euh"]  # a recognizer always emits something
    ali = align(utt.surfaces(), hyp_words)
    matched = {j for op, _, j in ali.ops if op == MATCH}
    tokens = tuple(
        Token(surface=w, error_flag=FLAG_CORRECT if j in matched else FLAG_ERROR)
        for j, w in enumerate(hyp_words)
    )
    return Utterance(utt.id, tokens, reference_tokens=utt.tokens)


def corrupt(utt: Utterance, cfg: NoiseConfig) -> Utterance:
    """Primary channel draw for an utterance, keyed by (seed, id)."""
    rng = random.Random(derived_seed("asr", cfg.seed, utt.id, 0))
    words = utt.surfaces()
    decisions, inserts = _channel_decisions(words, cfg, rng)
    return _hyp_utterance(utt, _emit(words, decisions, inserts))


def _redecode(words, decisions, inserts, cfg: NoiseConfig, rng):
    """Secondary decode correlated with the primary decisions."""
    kappa = cfg.nbest_correlation
    new_dec, new_ins = [], []
    for w, dec, ins in zip(words, decisions, inserts):
        if rng.random() < kappa:
            new_dec.append(dec)
        else:
            u = rng.random()
            if u < cfg.del_rate:
                new_dec.append(("del",))
            elif u < cfg.del_rate + cfg.sub_rate:
                new_dec.append(("sub", _substitute(w, cfg, rng)))
            else:
                new_dec.append(("keep",))
        if rng.random() < kappa:
            new_ins.append(ins)
        else:
            new_ins.append(_insertion_word(cfg, rng) if rng.random() < cfg.ins_rate else None)
    return new_dec, new_ins


def sample_nbest(utt: Utterance, cfg: NoiseConfig, n: int):
    """n independent channel draws, most probable draw first.

    Returns [(weight, words), ...] with unnormalized channel
    probabilities as weights.
    """
    if n < 1:
        raise AlignmentError(f"need n >= 1 hypotheses, got {n}")
    words = utt.surfaces()
    draws = []
    for k in range(n):
        rng = random.Random(derived_seed("asr", cfg.seed, utt.id, k))
        decisions, inserts = _channel_decisions(words, cfg, rng)
        logp = _decisions_logprob(decisions, inserts, cfg)
        draws.append((logp, k, _emit(words, decisions, inserts)))
    draws.sort(key=lambda d: (-d[0], d[1]))
    return [(math.exp(logp), hyp if hyp else ["euh"]) for logp, _, hyp in draws]


def decode_nbest(utt: Utterance, cfg: NoiseConfig, n: int):
    """Primary draw plus n-1 correlated re-decodes, primary first.

    This is the pipeline's recognizer surrogate: the first entry is the
    transcription the taggers consume, and the remaining entries mimic
    the correlated alternatives a lattice would hold.
    """
    if n < 1:
        raise AlignmentError(f"need n >= 1 hypotheses, got {n}")
    words = utt.surfaces()
    rng0 = random.Random(derived_seed("asr", cfg.seed, utt.id, 0))
    decisions, inserts = _channel_decisions(words, cfg, rng0)
    out = [(math.exp(_decisions_logprob(decisions, inserts, cfg)),
            _emit(words, decisions, inserts) or ["euh"])]
    for k in range(1, n):
        rng = random.Random(derived_seed("asr-re", cfg.seed, utt.id, k))
        dec_k, ins_k = _redecode(words, decisions, inserts, cfg, rng)
        out.append((math.exp(_decisions_logprob(dec_k, ins_k, cfg)),
                    _emit(words, dec_k, ins_k) or ["euh"]))
    return out


# ---------------------------------------------------------------------------
# Confusion networks and word posteriors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionNetwork:
    bins: tuple  # of tuple((word, posterior), ...) sorted by -posterior
    pivot: tuple  # the word sequence the bins are aligned to

    def __post_init__(self):
        for k, entries in enumerate(self.bins):
            total = sum(p for _, p in entries)
            if abs(total - 1.0) > 1e-9:
                raise AlignmentError(f"bin {k} posteriors sum to {total}")


def build_cn(nbest) -> ConfusionNetwork:
    """Align weighted hypotheses into the first (pivot) hypothesis.

    Every hypothesis contributes to each pivot bin exactly once: its
    aligned word on match/substitution, epsilon where it skips the bin.
    Words it inserts between bins are dropped; at this scale the pivot
    positions are all the taggers consume.
    """
    if not nbest:
        raise AlignmentError("need at least one hypothesis")
    pivot = list(nbest[0][1])
    mass = [dict() for _ in pivot]
    total = 0.0
    for weight, hyp in nbest:
        if weight <= 0:
            raise AlignmentError("hypothesis weights must be positive")
        total += weight
        ali = align(pivot, list(hyp))
        seen = set()
        for op, i, j in ali.ops:
            if op in (MATCH, SUB):
                mass[i][hyp[j]] = mass[i].get(hyp[j], 0.0) + weight
                seen.add(i)
            elif op == DEL:
                mass[i][EPS] = mass[i].get(EPS, 0.0) + weight
                seen.add(i)
        assert len(seen) == len(pivot)
    bins = []
    for entries in mass:
        scored = [(w, p / total) for w, p in entries.items()]
        scored.sort(key=lambda e: (-e[1], e[0]))
        # renormalize away float dust so the bin invariant holds exactly
        s = sum(p for _, p in scored)
        bins.append(tuple((w, p / s) for w, p in scored))
    return ConfusionNetwork(tuple(bins), tuple(pivot))


def pap_of(cn: ConfusionNetwork, hyp_words):
    """Posterior of each pivot word in its own bin."""
    if tuple(hyp_words) != cn.pivot:
        raise AlignmentError("hypothesis is not the pivot of this confusion network")
    out = []
    for word, entries in zip(cn.pivot, cn.bins):
        post = dict(entries).get(word, 0.0)
        out.append(post)
    return out


def attach_pap(utt: Utterance, cn: ConfusionNetwork) -> Utterance:
    paps = pap_of(cn, utt.surfaces())
    tokens = tuple(replace(t, pap=round(p, 6)) for t, p in zip(utt.tokens, paps))
    return replace(utt, tokens=tokens)


# ---------------------------------------------------------------------------
# Label projection (reference annotations onto a hypothesis)
# ---------------------------------------------------------------------------

def project_labels(hyp: Utterance) -> Utterance:
    """Copy reference labels onto aligned hypothesis words.

    Matches and substitutions inherit the reference label, insertions
    get null, and concepts on deleted words vanish.  Orphaned I-x
    continuations are promoted to B-x.
    """
    if hyp.reference_tokens is None:
        raise AlignmentError(f"utterance {hyp.id!r} has no reference tokens")
    ref_words = [t.surface for t in hyp.reference_tokens]
    ali = align(ref_words, hyp.surfaces())
    labels = [NULL_LABEL] * len(hyp.tokens)
    for op, i, j in ali.ops:
        if op in (MATCH, SUB):
            ref_lab = hyp.reference_tokens[i].label
            labels[j] = ref_lab if ref_lab is not None else NULL_LABEL
    return hyp.with_labels(repair_bio(labels))


# ---------------------------------------------------------------------------
# N-best and confusion network files
# ---------------------------------------------------------------------------

def write_nbest(path, per_utt) -> None:
    """per_utt: iterable of (utterance_id, [(weight, words), ...])."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for uid, nbest in per_utt:
            fh.write(f"# id={uid}\n")
            for weight, words in nbest:
                fh.write(f"{weight:.9e}\t{' '.join(words)}\n")
            fh.write("\n")


def read_nbest(path):
    out = []
    cur = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("# id="):
                cur = (line[len("# id="):], [])
                out.append(cur)
                continue
            weight, words = line.split("\t", 1)
            cur[1].append((float(weight), words.split()))
    return out


def write_cn(path, per_utt) -> None:
    """per_utt: iterable of (utterance_id, ConfusionNetwork)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for uid, cn in per_utt:
            fh.write(f"# id={uid}\n")
            for entries in cn.bins:
                fh.write(" ".join(f"{w}:{p:.6f}" for w, p in entries) + "\n")
            fh.write("\n")
