"""Emission-latency metrics for word-level timestamps.

Mean alignment delay (MAD) pools the hypothesis-minus-reference time
difference over every correctly recognized word across a corpus; mean end
delay (MED) averages the difference for the final word of each utterance.
Correctly recognized words are found with a Levenshtein alignment of the
word strings; timestamps play no part in the matching.
"""

import math
from dataclasses import dataclass


class NoDataError(ValueError):
    """Raised when a metric has no words/utterances to average over."""


@dataclass(frozen=True)
class TimedWord:
    """One word with its timestamp in seconds.

    For hypotheses the time is the emission time; for references it is
    whatever the supplier chose (onset or offset) — the metrics use it
    as-is.
    """

    word: str
    time: float

    def __post_init__(self):
        if not self.word or self.word.split() != [self.word]:
            raise ValueError(f"word must be non-empty without spaces: {self.word!r}")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"time must be finite and >= 0, got {self.time}")


@dataclass(frozen=True)
class LatencyReport:
    """MAD/MED in seconds plus the matches they were computed from."""

    mad: float
    med: float
    matched_pairs: int
    med_utterances: int
    matches: list


def match_words(hyp, ref):
    """Indices of correctly recognized words.

    Runs a unit-cost Levenshtein alignment of the word strings and returns
    the positions where the aligned words are equal, as ``(hyp index,
    ref index)`` pairs in increasing order. Ties between equal-cost
    alignments are broken by op preference match > substitution >
    deletion > insertion (a deletion skips a reference word, an insertion
    skips a hypothesis word), which also resolves any remaining ambiguity
    toward the earliest hypothesis index.
    """
    hw = [w.word for w in hyp]
    rw = [w.word for w in ref]
    n, m = len(hw), len(rw)
    # cost[i][j] = edit distance between hyp[i:] and ref[j:].
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    cost[n] = [m - j for j in range(m + 1)]
    for i in range(n - 1, -1, -1):
        cost[i][m] = n - i
        for j in range(m - 1, -1, -1):
            if hw[i] == rw[j]:
                cost[i][j] = cost[i + 1][j + 1]
            else:
                cost[i][j] = 1 + min(
                    cost[i + 1][j + 1], cost[i][j + 1], cost[i + 1][j]
                )
    pairs = []
    i = j = 0
    while i < n and j < m:
        if hw[i] == rw[j] and cost[i][j] == cost[i + 1][j + 1]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif hw[i] != rw[j] and cost[i][j] == 1 + cost[i + 1][j + 1]:
            i += 1
            j += 1
        elif cost[i][j] == 1 + cost[i][j + 1]:
            j += 1
        else:
            i += 1
    return pairs


def mad(utterances) -> float:
    """Mean alignment delay in seconds.

    ``utterances`` is a sequence of (hyp, ref) pairs of TimedWord
    sequences. Pools (hyp time - ref time) over every matched word of the
    whole corpus — not a mean of per-utterance means. Negative values mean
    the hypothesis runs ahead of the reference.
    """
    diff_sum = 0.0
    count = 0
    for hyp, ref in utterances:
        for hi, ri in match_words(hyp, ref):
            diff_sum += hyp[hi].time - ref[ri].time
            count += 1
    if count == 0:
        raise NoDataError("no matched words; MAD is undefined")
    return diff_sum / count


def med(utterances, matched_only: bool = True) -> float:
    """Mean end delay in seconds: average over utterances of
    (last hyp word time - last ref word time).

    By default only utterances whose last words are a matched pair count
    (consistent with restricting to correctly recognized words);
    ``matched_only=False`` averages over every utterance.
    """
    utterances = list(utterances)
    if not utterances:
        raise NoDataError("no utterances; MED is undefined")
    diff_sum = 0.0
    count = 0
    for hyp, ref in utterances:
        if not hyp or not ref:
            raise NoDataError("MED needs a last word in both hyp and ref")
        if matched_only:
            if (len(hyp) - 1, len(ref) - 1) not in match_words(hyp, ref):
                continue
        diff_sum += hyp[-1].time - ref[-1].time
        count += 1
    if count == 0:
        raise NoDataError("no utterance has matching last words; MED is undefined")
    return diff_sum / count


def latency_report(utterances, med_matched_only: bool = True) -> LatencyReport:
    """Compute MAD and MED together with the underlying matches."""
    utterances = list(utterances)
    matches = [match_words(hyp, ref) for hyp, ref in utterances]
    matched_pairs = sum(len(p) for p in matches)
    med_count = 0
    for (hyp, ref), pairs in zip(utterances, matches):
        if hyp and ref:
            if not med_matched_only or (len(hyp) - 1, len(ref) - 1) in pairs:
                med_count += 1
    return LatencyReport(
        mad=mad(utterances),
        med=med(utterances, matched_only=med_matched_only),
        matched_pairs=matched_pairs,
        med_utterances=med_count,
        matches=matches,
    )


def parse_timestamps(text: str):
    """Parse a timestamp file into ``{utt_id: [TimedWord, ...]}``.

    One utterance per line: ``utt_id<TAB>word:time word:time ...`` with
    times in seconds. Blank lines are ignored; insertion order is kept.
    """
    utts = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        utt_id, sep, rest = raw.partition("\t")
        utt_id = utt_id.strip()
        if not sep or not utt_id:
            raise ValueError(
                f"line {lineno}: expected 'utt_id<TAB>word:time ...'"
            )
        if utt_id in utts:
            raise ValueError(f"line {lineno}: duplicate utterance id {utt_id!r}")
        words = []
        for item in rest.split():
            word, sep2, stamp = item.rpartition(":")
            try:
                if not sep2:
                    raise ValueError
                words.append(TimedWord(word=word, time=float(stamp)))
            except ValueError:
                raise ValueError(
                    f"line {lineno}: malformed word:time entry {item!r}"
                ) from None
        utts[utt_id] = words
    return utts


def format_timestamps(utts) -> str:
    """Inverse of parse_timestamps (times written with 3 decimals)."""
    lines = []
    for utt_id, words in utts.items():
        items = " ".join(f"{w.word}:{w.time:.3f}" for w in words)
        lines.append(f"{utt_id}\t{items}")
    return "\n".join(lines) + ("\n" if lines else "")


def pair_utterances(hyp_utts, ref_utts):
    """Pair hypothesis and reference word lists by utterance id.

    Both mappings must cover exactly the same ids; pairs come back in
    hypothesis-file order.
    """
    missing_ref = [k for k in hyp_utts if k not in ref_utts]
    missing_hyp = [k for k in ref_utts if k not in hyp_utts]
    if missing_ref or missing_hyp:
        parts = []
        if missing_ref:
            parts.append(f"ids only in hyp: {', '.join(missing_ref[:5])}")
        if missing_hyp:
            parts.append(f"ids only in ref: {', '.join(missing_hyp[:5])}")
        raise ValueError("utterance ids do not line up; " + "; ".join(parts))
    return [(hyp_utts[k], ref_utts[k]) for k in hyp_utts]
