"""Synthetic multi-domain benchmarks for sentiment and POS tagging.

Sentiment domains each draw from their own topic vocabulary, a shared pool
of function words and domain-specific positive/negative cue words. Source
domains borrow topic and cue words from the target at different rates; one
borrows the target's cues with flipped polarity, so similarity alone is a
noisy guide. A fraction of every domain's reviews is bland: short, mostly
function words, a single cue token.

Tagging domains are sentences from a small grammar whose open-class
vocabulary differs per domain; some words are ambiguous between NOUN and
VERB, and rare words carry tag-revealing suffixes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .corpus import DomainCorpus, Example, write_labeled_reviews, write_tagged_conll, write_unlabeled_text

FUNCTION_WORDS = ("the a and of to is it this that was for in with but on as at my be i").split()


def _zipf(n, s=1.1):
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _words(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


# per source: (share of topic words borrowed from the target, share of cue
# words borrowed from the target, whether borrowed cues flip polarity)
SOURCE_PROFILES = ((0.4, 0.8, False), (0.0, 0.0, False), (0.2, 0.5, True))


def make_sentiment_benchmark(seed: int = 0, per_source: int = 500, target_labeled: int = 500,
                             unlabeled: int = 300, profiles=SOURCE_PROFILES, n_cues: int = 30,
                             cue_rate: float = 0.15, bland_fraction: float = 0.3,
                             target: str = "target") -> dict[str, DomainCorpus]:
    """Source domains ``src0..`` plus a target.

    With the default profiles ``src0`` is the near domain, ``src1`` is
    unrelated and ``src2`` looks like the target but uses its cue words with
    the opposite polarity.
    """
    rng = np.random.default_rng(seed)
    names = [f"src{i}" for i in range(len(profiles))] + [target]
    profile = dict(zip(names, profiles))
    profile[target] = (0.0, 0.0, False)
    topics = {d: _words(f"{d}_topic", 40) for d in names}
    cues = {d: (_words(f"{d}_pos", n_cues), _words(f"{d}_neg", n_cues)) for d in names}
    shared = (["good", "great"], ["bad", "poor"])
    fw_p = _zipf(len(FUNCTION_WORDS))
    topic_p = _zipf(40, 0.8)
    cue_p = _zipf(n_cues, 0.7)

    def cue_word(domain, label):
        _, cue_share, flip = profile[domain]
        if rng.random() < 0.08:
            options = shared[0] if label else shared[1]
            return options[rng.integers(len(options))]
        owner = target if rng.random() < cue_share else domain
        polarity = (1 - label) if (owner != domain and flip) else label
        options = cues[owner][0] if polarity else cues[owner][1]
        return options[rng.choice(n_cues, p=cue_p)]

    def topic_word(domain):
        owner = target if rng.random() < profile[domain][0] else domain
        return topics[owner][rng.choice(40, p=topic_p)]

    def review(domain, label):
        bland = rng.random() < bland_fraction
        length = int(rng.integers(8, 16) if bland else rng.integers(20, 45))
        n_cue = 1 if bland else max(1, int(rng.binomial(length, cue_rate)))
        n_topic = int(rng.binomial(length - n_cue, 0.15 if bland else 0.45))
        tokens = [cue_word(domain, label) for _ in range(n_cue)]
        if not bland and rng.random() < 0.3:
            tokens.append(cue_word(domain, 1 - label))
        tokens += [topic_word(domain) for _ in range(n_topic)]
        n_fw = length - n_cue - n_topic
        tokens += [FUNCTION_WORDS[i] for i in rng.choice(len(FUNCTION_WORDS), size=n_fw, p=fw_p)]
        rng.shuffle(tokens)
        return tuple(tokens)

    def make(domain, n_labeled, n_unlabeled):
        labels = np.array([i % 2 for i in range(n_labeled)])
        rng.shuffle(labels)
        labeled = [Example(f"{domain}-{i}", review(domain, int(y)), int(y), domain)
                   for i, y in enumerate(labels)]
        unlab = [Example(f"{domain}-u{i}", review(domain, int(rng.integers(2))), None, domain)
                 for i in range(n_unlabeled)]
        return DomainCorpus(domain, labeled, unlab)

    corpora = {d: make(d, per_source, unlabeled) for d in names[:-1]}
    corpora[target] = make(target, target_labeled, unlabeled)
    return corpora


_GRAMMAR = [
    ("DET", "ADJ", "NOUN", "VERB", "ADP", "DET", "NOUN", "."),
    ("PRON", "VERB", "DET", "NOUN", "."),
    ("DET", "NOUN", "VERB", "ADV", "."),
    ("PRON", "ADV", "VERB", "DET", "ADJ", "NOUN", "CONJ", "PRON", "VERB", "."),
    ("NUM", "NOUN", "VERB", "ADP", "DET", "NOUN", "."),
    ("DET", "NOUN", "ADP", "DET", "NOUN", "VERB", "PRT", "VERB", "."),
]
_CLOSED = {
    "DET": ["the", "a", "this", "every"],
    "PRON": ["he", "she", "they", "we"],
    "ADP": ["in", "on", "with", "from"],
    "CONJ": ["and", "but"],
    "PRT": ["to"],
    ".": [".", "!"],
    "NUM": ["two", "three", "10", "42"],
}
_AMBIGUOUS = ["run", "watch", "book", "play", "record", "walk", "cook", "dress"]
_SUFFIX = {"NOUN": "tion", "VERB": "ing", "ADJ": "ous", "ADV": "ly"}
_SYLLABLES = ["ka", "lo", "mi", "ter", "van", "su", "pel", "dor", "bri", "zan"]


def make_tagging_benchmark(seed: int = 0, n_sources: int = 3, per_source: int = 250,
                           target_labeled: int = 250, unlabeled: int = 100,
                           target: str = "target") -> dict[str, DomainCorpus]:
    rng = np.random.default_rng(seed)
    names = [f"src{i}" for i in range(n_sources)] + [target]

    def stem():
        return "".join(_SYLLABLES[i] for i in rng.integers(len(_SYLLABLES), size=2))

    lexicon = {
        d: {tag: [f"{d[:3]}{tag.lower()}{i}" for i in range(25)] for tag in ("NOUN", "VERB", "ADJ", "ADV")}
        for d in names
    }

    def word(domain, tag):
        if tag in _CLOSED:
            options = _CLOSED[tag]
            return options[rng.integers(len(options))]
        if tag in ("NOUN", "VERB") and rng.random() < 0.25:
            return _AMBIGUOUS[rng.integers(len(_AMBIGUOUS))]
        if rng.random() < 0.2:
            return stem() + _SUFFIX[tag]
        options = lexicon[domain][tag]
        return options[rng.integers(len(options))]

    def sentence(domain):
        template = _GRAMMAR[rng.integers(len(_GRAMMAR))]
        tokens = [word(domain, tag) for tag in template]
        tokens[0] = tokens[0].capitalize()
        return tuple(tokens), tuple(template)

    def make(domain, n_labeled, n_unlabeled):
        labeled = []
        for i in range(n_labeled):
            tokens, tags = sentence(domain)
            labeled.append(Example(f"{domain}-{i}", tokens, tags, domain))
        unlab = [Example(f"{domain}-u{i}", sentence(domain)[0], None, domain) for i in range(n_unlabeled)]
        return DomainCorpus(domain, labeled, unlab)

    corpora = {d: make(d, per_source, unlabeled) for d in names[:-1]}
    corpora[target] = make(target, target_labeled, unlabeled)
    return corpora


def write_benchmark(corpora: dict[str, DomainCorpus], directory, task: str, target: str = "target",
                    **manifest_fields) -> Path:
    """Write corpora in the loader formats plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    domains = {}
    for name, corpus in corpora.items():
        ext = "conll" if task == "pos" else "tsv"
        labeled = directory / f"{name}.{ext}"
        (write_tagged_conll if task == "pos" else write_labeled_reviews)(corpus.labeled, labeled)
        entry = {"labeled": labeled.name}
        if corpus.unlabeled:
            unl = directory / f"{name}.unlabeled.txt"
            write_unlabeled_text(corpus.unlabeled, unl)
            entry["unlabeled"] = unl.name
        domains[name] = entry
    manifest = {"task": task, "target": target, "domains": domains, **manifest_fields}
    path = directory / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path
