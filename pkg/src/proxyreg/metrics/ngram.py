"""Corpus-level BLEU, ROUGE-L and CIDEr over tokenized captions.

A corpus is a pair of aligned sequences: ``candidates[i]`` is one token list,
``references[i]`` a non-empty list of token lists.
"""

from __future__ import annotations

import math
from collections import Counter

from ..errors import DomainError


def ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_corpus(candidates, references):
    if len(candidates) == 0:
        raise DomainError("empty corpus")
    if len(candidates) != len(references):
        raise DomainError("candidates and references are not aligned")
    for refs in references:
        if len(refs) == 0:
            raise DomainError("every item needs at least one reference")


def clipped_counts(candidate, refs, n: int) -> tuple[int, int]:
    """(reference-clipped matches, total candidate n-grams) for one segment."""
    cand = ngrams(candidate, n)
    max_ref = Counter()
    for ref in refs:
        for gram, c in ngrams(ref, n).items():
            max_ref[gram] = max(max_ref[gram], c)
    matched = sum(min(c, max_ref[gram]) for gram, c in cand.items())
    return matched, sum(cand.values())


def closest_ref_length(cand_len: int, refs) -> int:
    # ties go to the shorter reference
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def bleu(candidates, references, n_max: int = 4, with_brevity: bool = True) -> list[float]:
    """[BLEU_1, ..., BLEU_n_max] with corpus-level clipped precisions, no smoothing."""
    if not 1 <= n_max <= 4:
        raise DomainError("n_max must be in 1..4")
    _check_corpus(candidates, references)
    matched = [0] * n_max
    total = [0] * n_max
    cand_len = ref_len = 0
    for cand, refs in zip(candidates, references):
        cand_len += len(cand)
        ref_len += closest_ref_length(len(cand), refs)
        for n in range(1, n_max + 1):
            m, t = clipped_counts(cand, refs, n)
            matched[n - 1] += m
            total[n - 1] += t
    if cand_len == 0:
        return [0.0] * n_max
    bp = 1.0 if (cand_len >= ref_len or not with_brevity) else math.exp(1.0 - ref_len / cand_len)
    scores, log_sum = [], 0.0
    for n in range(n_max):
        if matched[n] == 0 or log_sum == -math.inf:
            log_sum = -math.inf
            scores.append(0.0)
            continue
        log_sum += math.log(matched[n] / total[n])
        scores.append(bp * math.exp(log_sum / (n + 1)))
    return scores


def lcs_length(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_segment(candidate, refs, beta: float = 1.2) -> float:
    best = 0.0
    for ref in refs:
        lcs = lcs_length(candidate, ref)
        if lcs == 0:
            continue
        p, r = lcs / len(candidate), lcs / len(ref)
        best = max(best, (1 + beta ** 2) * p * r / (r + beta ** 2 * p))
    return best


def rouge_l(candidates, references, beta: float = 1.2) -> float:
    """Mean over segments of the best LCS F-measure against any reference."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    _check_corpus(candidates, references)
    return sum(rouge_l_segment(c, refs, beta) for c, refs in zip(candidates, references)) / len(candidates)


def _tfidf(counts: Counter, df: Counter, n_docs: int) -> dict:
    total = sum(counts.values())
    return {g: (c / total) * math.log(n_docs / max(df[g], 1)) for g, c in counts.items()}


def _cos(u: dict, v: dict) -> float:
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu < 1e-12 or nv < 1e-12:
        return 0.0
    return sum(x * v.get(g, 0.0) for g, x in u.items()) / (nu * nv)


def cider_per_n(candidates, references, n_max: int = 4) -> list[list[float]]:
    """scores[i][n-1]: mean TF-IDF cosine of item i against its references at order n."""
    _check_corpus(candidates, references)
    n_docs = len(candidates)
    if n_docs < 2:
        raise DomainError("CIDEr needs at least two corpus items")
    df = [Counter() for _ in range(n_max)]
    for refs in references:
        for n in range(1, n_max + 1):
            df[n - 1].update(set().union(*(ngrams(r, n).keys() for r in refs)))
    out = []
    for cand, refs in zip(candidates, references):
        row = []
        for n in range(1, n_max + 1):
            vc = _tfidf(ngrams(cand, n), df[n - 1], n_docs)
            row.append(sum(_cos(vc, _tfidf(ngrams(r, n), df[n - 1], n_docs)) for r in refs) / len(refs))
        out.append(row)
    return out


def cider(candidates, references, n_max: int = 4, scaled: bool = False) -> float:
    """Corpus CIDEr: mean over items and n-gram orders; ``scaled`` multiplies by 10."""
    per_item = cider_per_n(candidates, references, n_max)
    score = sum(sum(row) / n_max for row in per_item) / len(per_item)
    return 10.0 * score if scaled else score
