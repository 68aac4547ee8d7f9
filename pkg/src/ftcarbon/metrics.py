"""Summarization-quality metrics: ROUGE-1/2/L, METEOR and BERTScore.

Conventions fixed here because published scores rarely state them:

* tokens are lowercased maximal runs of Unicode letters and digits;
* ROUGE-N uses clipped n-gram counts, F1 is the harmonic mean;
* METEOR matches exact tokens only (no stemming or synonym stages), aligns
  greedily left to right and uses alpha=0.9, beta=3, gamma=0.5;
* BERTScore runs on precomputed token embeddings, with no IDF weighting
  and no baseline rescaling. Cosine similarities are clipped to [0, 1].

Any metric over an empty side is 0.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCorpus,
    EmptySequence,
    FileUnreadable,
    MalformedRow,
    MissingEmbeddings,
    NonFiniteVector,
    SchemaViolation,
)

METRIC_NOTES = (
    "ROUGE: clipped n-gram counts, harmonic F1, no stemming",
    "METEOR: exact-match unigram alignment (greedy, left to right); stemming and synonym stages omitted",
    "BERTScore: precomputed embeddings, greedy cosine matching, no IDF weighting, no baseline rescaling",
)

_TOKEN_RE = re.compile(r"[^\W_]+")

TokenSeq = tuple[str, ...]


def tokenize(text: str) -> TokenSeq:
    return tuple(_TOKEN_RE.findall(text.lower()))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PRF":
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))

    @classmethod
    def from_f1(cls, f1: float) -> "PRF":
        """For published tables that report F1 only; P and R are set equal to it."""
        return cls(f1, f1, f1)


ZERO = PRF(0.0, 0.0, 0.0)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    if n == 1:
        return Counter(tokens)
    return Counter(zip(*(tokens[i:] for i in range(n))))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> PRF:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand, ref = _ngrams(candidate, n), _ngrams(reference, n)
    c_total, r_total = max(len(candidate) - n + 1, 0), max(len(reference) - n + 1, 0)
    if c_total == 0 or r_total == 0:
        return ZERO
    matches = sum(min(c, ref[g]) for g, c in cand.items() if g in ref)
    return PRF.from_pr(matches / c_total, matches / r_total)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence (bit-parallel, one word op per token of ``a``).

    Bit j of ``v`` is cleared once b[j] has been consumed by some LCS
    prefix; the LCS length is the number of cleared bits.
    """
    masks: dict[str, int] = {}
    for j, tok in enumerate(b):
        masks[tok] = masks.get(tok, 0) | (1 << j)
    full = (1 << len(b)) - 1
    v = full
    for tok in a:
        u = v & masks.get(tok, 0)
        v = ((v + u) | (v - u)) & full
    return len(b) - v.bit_count()


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PRF:
    if not candidate or not reference:
        return ZERO
    lcs = lcs_length(candidate, reference)
    return PRF.from_pr(lcs / len(candidate), lcs / len(reference))


def meteor_alignment(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """Exact-match unigram alignment as (candidate index, reference index) pairs.

    Each candidate token, in order, takes the earliest unused reference
    position holding the same token.
    """
    free: dict[str, list[int]] = {}
    for j, tok in enumerate(reference):
        free.setdefault(tok, []).append(j)
    pointer = {tok: 0 for tok in free}
    pairs = []
    for i, tok in enumerate(candidate):
        slots = free.get(tok)
        if slots and pointer[tok] < len(slots):
            pairs.append((i, slots[pointer[tok]]))
            pointer[tok] += 1
    return pairs


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(candidate: Sequence[str], reference: Sequence[str]) -> float:
    alignment = meteor_alignment(candidate, reference)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, r = m / len(candidate), m / len(reference)
    f_mean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (count_chunks(alignment) / m) ** 3
    return f_mean * (1 - penalty)


# -- embeddings -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbeddingSeq:
    tokens: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim == 1 and vecs.size == 0:
            vecs = vecs.reshape(0, 1)
        if vecs.ndim != 2:
            raise DimensionMismatch(f"vectors must form a 2-D array, got shape {vecs.shape}")
        if vecs.shape[0] != len(self.tokens):
            raise DimensionMismatch(f"{len(self.tokens)} tokens but {vecs.shape[0]} vectors")
        if vecs.shape[1] < 1:
            raise DimensionMismatch("embedding dimension must be >= 1")
        if not np.isfinite(vecs).all():
            bad = int(np.flatnonzero(~np.isfinite(vecs).all(axis=1))[0])
            raise NonFiniteVector(f"vector {bad} ({self.tokens[bad]!r}) has non-finite components")
        vecs.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_embeddings(path: str | Path) -> EmbeddingSeq:
    """Read ``<count> <dim>`` then one ``token c1 c2 ...`` line per token."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read embeddings {str(path)!r}: {exc}") from None
    if not lines:
        raise SchemaViolation(f"{path}: empty embedding file")
    try:
        count, dim = (int(x) for x in lines[0].split())
    except ValueError:
        raise SchemaViolation(f"{path}: first line must be '<token_count> <dimension>'") from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise SchemaViolation(f"{path}: header announces {count} tokens, found {len(body)}")
    tokens, rows = [], []
    for lineno, ln in enumerate(body, start=2):
        parts = ln.split()
        if len(parts) != dim + 1:
            raise MalformedRow(f"{path}: line {lineno}: expected token and {dim} components")
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError:
            raise MalformedRow(f"{path}: line {lineno}: non-numeric component") from None
        tokens.append(parts[0])
    return EmbeddingSeq(tuple(tokens), np.array(rows, dtype=float).reshape(count, dim))


def bertscore_precomputed(candidate: EmbeddingSeq, reference: EmbeddingSeq) -> PRF:
    if len(candidate) == 0 or len(reference) == 0:
        raise EmptySequence("bertscore needs non-empty candidate and reference")
    if candidate.dim != reference.dim:
        raise DimensionMismatch(f"candidate dimension {candidate.dim} != reference dimension {reference.dim}")
    c, r = candidate.vectors, reference.vectors
    cn = np.linalg.norm(c, axis=1, keepdims=True)
    rn = np.linalg.norm(r, axis=1, keepdims=True)
    sim = (c / np.where(cn == 0, 1, cn)) @ (r / np.where(rn == 0, 1, rn)).T
    # a vector's cosine with an identical non-zero vector is 1 by definition
    same = (c[:, None, :] == r[None, :, :]).all(axis=-1) & (cn > 0) & (rn.T > 0)
    sim[same] = 1.0
    sim = np.clip(sim, 0.0, 1.0)
    precision = math.fsum(sim.max(axis=1)) / len(candidate)
    recall = math.fsum(sim.max(axis=0)) / len(reference)
    return PRF.from_pr(precision, recall)


# -- corpus scoring ---------------------------------------------------------

@dataclass(frozen=True)
class MetricScore:
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF
    meteor: float
    bertscore: PRF | None = None

    @classmethod
    def from_points(cls, rouge1: float, rouge2: float, rougeL: float, meteor: float,
                    bertscore: float | None = None) -> "MetricScore":
        """Scores as printed in results tables (F1 x 100)."""
        return cls(PRF.from_f1(rouge1 / 100), PRF.from_f1(rouge2 / 100), PRF.from_f1(rougeL / 100),
                   meteor / 100, None if bertscore is None else PRF.from_f1(bertscore / 100))


def score_pair(candidate: str, reference: str,
               embeddings: tuple[EmbeddingSeq, EmbeddingSeq] | None = None) -> MetricScore:
    c, r = tokenize(candidate), tokenize(reference)
    return MetricScore(
        rouge1=rouge_n(c, r, 1),
        rouge2=rouge_n(c, r, 2),
        rougeL=rouge_l(c, r),
        meteor=meteor(c, r),
        bertscore=None if embeddings is None else bertscore_precomputed(*embeddings),
    )


def _mean_prf(items: Sequence[PRF]) -> PRF:
    n = len(items)
    return PRF(math.fsum(x.precision for x in items) / n,
               math.fsum(x.recall for x in items) / n,
               math.fsum(x.f1 for x in items) / n)


def mean_score(scores: Sequence[MetricScore]) -> MetricScore:
    """Component-wise arithmetic mean. Exact summation keeps it order-independent."""
    if not scores:
        raise EmptyCorpus("no scores to average")
    has_bert = all(s.bertscore is not None for s in scores)
    return MetricScore(
        rouge1=_mean_prf([s.rouge1 for s in scores]),
        rouge2=_mean_prf([s.rouge2 for s in scores]),
        rougeL=_mean_prf([s.rougeL for s in scores]),
        meteor=math.fsum(s.meteor for s in scores) / len(scores),
        bertscore=_mean_prf([s.bertscore for s in scores]) if has_bert else None,
    )


def score_corpus(pairs: Sequence[tuple[str, str]],
                 embeddings: Mapping[int, tuple[EmbeddingSeq, EmbeddingSeq]] | None = None,
                 ) -> tuple[list[MetricScore], MetricScore]:
    """Score every pair and the corpus mean.

    ``embeddings`` maps the 1-based pair number to its (candidate,
    reference) embedding sequences and must cover every pair.
    """
    if not pairs:
        raise EmptyCorpus("corpus has no pairs")
    per_pair = []
    for number, (cand, ref) in enumerate(pairs, start=1):
        emb = None
        if embeddings is not None:
            emb = embeddings.get(number)
            if emb is None:
                raise MissingEmbeddings(f"no embeddings for pair {number}")
        per_pair.append(score_pair(cand, ref, emb))
    return per_pair, mean_score(per_pair)


def load_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Read a candidate<TAB>reference file, one pair per line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read pairs {str(path)!r}: {exc}") from None
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise MalformedRow(f"{path}: line {lineno}: expected 2 tab-separated fields, got {len(fields)}")
        pairs.append((fields[0], fields[1]))
    return pairs


def load_embedding_dir(path: str | Path, count: int) -> dict[int, tuple[EmbeddingSeq, EmbeddingSeq]]:
    """Load ``<n>.cand.emb`` / ``<n>.ref.emb`` for pairs 1..count.

    Pairs without both files are left out; :func:`score_corpus` reports them.
    """
    root = Path(path)
    if not root.is_dir():
        raise FileUnreadable(f"embedding directory {str(path)!r} does not exist")
    out = {}
    for n in range(1, count + 1):
        cand, ref = root / f"{n}.cand.emb", root / f"{n}.ref.emb"
        if cand.exists() and ref.exists():
            out[n] = (load_embeddings(cand), load_embeddings(ref))
    return out


# -- serialization ----------------------------------------------------------

def prf_to_dict(x: PRF | None) -> dict | None:
    return None if x is None else {"precision": x.precision, "recall": x.recall, "f1": x.f1}


def score_to_dict(s: MetricScore) -> dict:
    return {"rouge1": prf_to_dict(s.rouge1), "rouge2": prf_to_dict(s.rouge2), "rougeL": prf_to_dict(s.rougeL),
            "meteor": s.meteor, "bertscore": prf_to_dict(s.bertscore)}


def score_from_dict(d: dict) -> MetricScore:
    return MetricScore(PRF(**d["rouge1"]), PRF(**d["rouge2"]), PRF(**d["rougeL"]), d["meteor"],
                       None if d.get("bertscore") is None else PRF(**d["bertscore"]))
