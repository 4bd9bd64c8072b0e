"""Top-n selection and the random / Jensen-Shannon baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import DomainCorpus, Vocabulary
from .metrics import jensen_shannon
from .representations import domain_representation, term_distribution


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    ids: tuple[str, ...]
    scores: np.ndarray | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("selected ids must be unique")

    def __len__(self):
        return len(self.indices)


def _ranking(scores: np.ndarray) -> np.ndarray:
    # descending score, ascending index on ties
    return np.lexsort((np.arange(scores.size), -scores))


def select_top_n(scores, n: int, stratify_labels: Sequence | None = None,
                 ids: Sequence[str] | None = None) -> SelectionResult:
    """Indices of the n highest scores.

    With ``stratify_labels`` the top n / 2 per class are taken (two classes;
    more generally n split evenly across classes, remainder to the earlier
    classes in sorted order).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if n < 0 or n > scores.size:
        raise ValueError(f"cannot select {n} of {scores.size} examples")
    order = _ranking(scores)
    if stratify_labels is None:
        chosen = order[:n]
    else:
        labels = np.asarray(stratify_labels)
        if labels.shape[0] != scores.size:
            raise ValueError("one label per score is required")
        classes = sorted(set(labels.tolist()))
        quota = {c: n // len(classes) + (i < n % len(classes)) for i, c in enumerate(classes)}
        for c in classes:
            available = int((labels == c).sum())
            if quota[c] > available:
                raise ValueError(f"class {c!r} has {available} examples, {quota[c]} requested")
        taken = {c: 0 for c in classes}
        chosen = []
        for i in order:
            c = labels[i].item()
            if taken[c] < quota[c]:
                taken[c] += 1
                chosen.append(i)
                if len(chosen) == n:
                    break
        chosen = np.array(chosen, dtype=np.int64)
    idx = tuple(int(i) for i in chosen)
    sel_ids = tuple(ids[i] for i in idx) if ids is not None else tuple(str(i) for i in idx)
    return SelectionResult(idx, sel_ids, scores[list(idx)])


def baseline_random(pool: Sequence, n: int, seed: int) -> SelectionResult:
    if n > len(pool):
        raise ValueError(f"cannot select {n} of {len(pool)} pool examples")
    rng = np.random.default_rng(seed)
    idx = tuple(int(i) for i in rng.choice(len(pool), size=n, replace=False))
    return SelectionResult(idx, tuple(pool[i].id for i in idx), provenance={"method": "random", "seed": seed})


def js_scores(pool: Sequence, target_repr: np.ndarray, vocab: Vocabulary) -> np.ndarray:
    return np.array([jensen_shannon(term_distribution(ex.tokens, vocab), target_repr) for ex in pool])


def baseline_js_examples(pool: Sequence, target_repr: np.ndarray, n: int, vocab: Vocabulary,
                         stratify: bool = False) -> SelectionResult:
    """The n pool examples with the smallest JS divergence to the target term distribution."""
    js = js_scores(pool, target_repr, vocab)
    labels = [ex.label for ex in pool] if stratify else None
    result = select_top_n(-js, n, labels, ids=[ex.id for ex in pool])
    return SelectionResult(result.indices, result.ids, js[list(result.indices)],
                           {"method": "js-examples"})


def most_similar_domain(domains: Mapping[str, DomainCorpus], target_repr, vocab: Vocabulary) -> str:
    """Source domain whose labeled + unlabeled term distribution is closest in JS; ties by id."""
    scored = sorted(
        (jensen_shannon(domain_representation(c.all_examples(), vocab), target_repr), name)
        for name, c in domains.items()
    )
    return scored[0][1]


def baseline_js_domain(domains: Mapping[str, DomainCorpus], target_repr, n: int, seed: int,
                       vocab: Vocabulary, pool: Sequence | None = None) -> SelectionResult:
    """n examples sampled uniformly from the most JS-similar source domain.

    When ``pool`` is given, indices refer to positions in it and only
    examples present in the pool are eligible; otherwise they index the
    chosen domain's labeled examples.
    """
    name = most_similar_domain(domains, target_repr, vocab)
    labeled = domains[name].labeled
    if pool is not None:
        position = {ex.id: i for i, ex in enumerate(pool)}
        candidates = [position[ex.id] for ex in labeled if ex.id in position]
    else:
        pool, candidates = labeled, list(range(len(labeled)))
    if n > len(candidates):
        raise ValueError(f"domain {name!r} has {len(candidates)} usable labeled examples, {n} requested")
    rng = np.random.default_rng(seed)
    idx = tuple(candidates[int(i)] for i in rng.choice(len(candidates), size=n, replace=False))
    picked = [pool[i] for i in idx]
    return SelectionResult(idx, tuple(ex.id for ex in picked),
                           provenance={"method": "js-domain", "domain": name, "seed": seed})
