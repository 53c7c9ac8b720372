"""Beam-search generation with length normalization and lexicon-constrained
selection by edit distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSequence
from .seq2seq import ConvSeq2Seq, SourceRepresentation
from .tensor import Tensor, no_grad

DEFAULT_BEAM = 5
DEFAULT_MAX_LEN = 25


@dataclass
class Hypothesis:
    """Emitted token ids (no <s>; trailing </s> once finished) and their
    accumulated log-probability."""
    tokens: list[int] = field(default_factory=list)
    logprob: float = 0.0
    finished: bool = False

    @property
    def normalized_score(self) -> float:
        return self.logprob / max(1, len(self.tokens))

    def text(self, vocab) -> str:
        return vocab.decode(self.tokens)


@dataclass
class Lexicon:
    words: list[str]

    def __post_init__(self):
        if not self.words:
            raise ValueError("lexicon must be nonempty")

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, "r", encoding="utf-8") as fh:
            words = [line.strip().upper() for line in fh if line.strip()]
        return cls(words=words)


def _next_logprobs(net: ConvSeq2Seq, src: SourceRepresentation,
                   prefix: list[int]) -> np.ndarray:
    """Log-distribution over the next token after the given emitted prefix
    (recomputed from scratch; no incremental state)."""
    tokens = np.array([net.vocab.bos_id, *prefix], dtype=np.int64)
    logits, _ = net.decode_teacher_forced(tokens, src)
    row = logits.data[-1]
    row = row - row.max()
    return row - np.log(np.exp(row).sum())


def beam_search(net: ConvSeq2Seq, features: FeatureSequence, k: int = DEFAULT_BEAM,
                max_len: int = DEFAULT_MAX_LEN) -> list[Hypothesis]:
    """Width-k beam over next tokens, ranked by length-normalized score.

    Live hypotheses are pruned on accumulated log-probability; emitting the
    end token moves a hypothesis to the complete set.  Search stops once k
    hypotheses are complete, all beams die, or max_len steps have run.
    Returns complete hypotheses ranked by logprob/length (length includes
    the end token); if none completed, the best unfinished ones are
    returned instead.
    """
    if k < 1:
        raise ValueError("beam width must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    with no_grad():
        src = net.encode_source(Tensor(features.vectors[None]))
        eos = net.vocab.eos_id
        live = [Hypothesis()]
        complete: list[Hypothesis] = []
        for _ in range(max_len):
            candidates: list[Hypothesis] = []
            for hyp in live:
                logp = _next_logprobs(net, src, hyp.tokens)
                for tok, lp in enumerate(logp):
                    candidates.append(Hypothesis(tokens=hyp.tokens + [tok],
                                                 logprob=hyp.logprob + float(lp)))
            candidates.sort(key=lambda h: h.logprob, reverse=True)
            live = []
            for hyp in candidates[:k]:
                if hyp.tokens[-1] == eos:
                    hyp.finished = True
                    complete.append(hyp)
                else:
                    live.append(hyp)
            if len(complete) >= k or not live:
                break
    pool = complete if complete else live
    pool.sort(key=lambda h: h.normalized_score, reverse=True)
    return pool[:k]


def levenshtein(a: str, b: str) -> int:
    """Minimal number of single-character inserts, deletes, and substitutions
    turning a into b (two-row dynamic program)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1,          # delete from a
                           cur[j - 1] + 1,       # insert into a
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lexicon_select(hyps: list[Hypothesis], lexicon: Lexicon, vocab) -> str:
    """Pick the lexicon word closest (edit distance) to any hypothesis.

    Ties prefer the hypothesis with the higher normalized score, then the
    lexicographically smaller word.
    """
    if not hyps:
        raise ValueError("no hypotheses to match")
    best: tuple[int, float, str] | None = None
    for hyp in hyps:
        text = hyp.text(vocab)
        for word in lexicon.words:
            key = (levenshtein(text, word), -hyp.normalized_score, word)
            if best is None or key < best:
                best = key
    return best[2]
