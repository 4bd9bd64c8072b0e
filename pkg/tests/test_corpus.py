import numpy as np
import pytest

from dataselect.corpus import (
    CorpusFormatError,
    DomainCorpus,
    Example,
    build_vocabulary,
    load_labeled_reviews,
    load_tagged_conll,
    load_unlabeled_text,
    split_validation,
    tokenize,
    write_labeled_reviews,
    write_tagged_conll,
)

from conftest import ex


@pytest.mark.parametrize("text, expected", [
    ("Great DVD !", ["great", "dvd", "!"]),
    ("", []),
    ("a  b", ["a", "b"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_keeps_case_when_asked():
    assert tokenize("Great DVD", lowercase=False) == ["Great", "DVD"]


def test_load_labeled_reviews(tmp_path):
    path = tmp_path / "books.tsv"
    path.write_text("1\tGreat read\n0\tdull\n\n1\tloved it !\n")
    corpus = load_labeled_reviews(path)
    assert corpus.domain == "books"
    assert len(corpus.labeled) == 3
    assert [e.label for e in corpus.labeled] == [1, 0, 1]
    assert corpus.labeled[0].tokens == ("great", "read")
    assert len({e.id for e in corpus.labeled}) == 3


def test_load_labeled_reviews_bad_label(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("1\tfine\n2\tok\n")
    with pytest.raises(CorpusFormatError, match=":2:"):
        load_labeled_reviews(path)


def test_load_labeled_reviews_missing_tab(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("1 no tab here\n")
    with pytest.raises(CorpusFormatError) as err:
        load_labeled_reviews(path)
    assert err.value.lineno == 1


def test_load_labeled_reviews_empty(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("")
    assert len(load_labeled_reviews(path, domain="x").labeled) == 0


def test_load_conll(tmp_path):
    path = tmp_path / "wsj.conll"
    rows = ["The\tDET", "dog\tNOUN", "ran\tVERB", "",
            "A\tDET", "cat\tNOUN", "sat\tVERB", "on\tADP", "mats\tNOUN", "", "", ""]
    path.write_text("\n".join(rows))
    corpus = load_tagged_conll(path)
    assert [len(e.tokens) for e in corpus.labeled] == [3, 5]
    assert corpus.labeled[1].label == ("DET", "NOUN", "VERB", "ADP", "NOUN")
    assert corpus.labeled[0].tokens[0] == "The"


def test_load_conll_single_column(tmp_path):
    path = tmp_path / "bad.conll"
    path.write_text("The\tDET\ndog\n")
    with pytest.raises(CorpusFormatError, match=":2:"):
        load_tagged_conll(path)


def test_unlabeled_text(tmp_path):
    path = tmp_path / "books.unlabeled.txt"
    path.write_text("One line\n\nTwo  lines here\n")
    out = load_unlabeled_text(path)
    assert [e.tokens for e in out] == [("one", "line"), ("two", "lines", "here")]
    assert all(e.label is None and e.domain == "books" for e in out)


def test_writers_round_trip(tmp_path):
    reviews = [ex("a-0", "good stuff", 1), ex("a-1", "bad", 0)]
    write_labeled_reviews(reviews, tmp_path / "r.tsv")
    back = load_labeled_reviews(tmp_path / "r.tsv", domain="")
    assert [(e.tokens, e.label) for e in back.labeled] == [(e.tokens, e.label) for e in reviews]

    sents = [Example("s0", ("I", "run"), ("PRON", "VERB")), Example("s1", ("Go",), ("VERB",))]
    write_tagged_conll(sents, tmp_path / "t.conll")
    back = load_tagged_conll(tmp_path / "t.conll")
    assert [(e.tokens, e.label) for e in back.labeled] == [(e.tokens, e.label) for e in sents]


def test_example_validation():
    with pytest.raises(ValueError):
        Example("x", ())
    with pytest.raises(ValueError):
        Example("x", ("a", "b"), ("N",))


def test_domain_corpus_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        DomainCorpus("d", [ex("x", "a", 1, "d"), ex("x", "b", 0, "d")])


def test_vocabulary_counts():
    corpus = DomainCorpus("d", [ex("0", "a a a b b c", 1, "d")])
    vocab = build_vocabulary([corpus], max_size=2)
    assert vocab.types == ("a", "b")
    np.testing.assert_allclose(vocab.probs, [0.6, 0.4])


def test_vocabulary_keeps_everything_when_large():
    corpus = DomainCorpus("d", [ex("0", "a a b c d", 1, "d")])
    vocab = build_vocabulary([corpus], max_size=100)
    assert len(vocab) == 4
    assert vocab.probs.sum() == pytest.approx(1.0)


def test_vocabulary_tie_break():
    corpus = DomainCorpus("d", [ex("0", "zeta alpha mid mid", 1, "d")])
    vocab = build_vocabulary([corpus], max_size=2)
    assert vocab.types == ("mid", "alpha")


def test_vocabulary_zero_size():
    with pytest.raises(ValueError):
        build_vocabulary([DomainCorpus("d", [ex("0", "a", 1, "d")])], max_size=0)


def test_vocabulary_uses_unlabeled_text():
    corpus = DomainCorpus("d", [ex("0", "a", 1, "d")], [ex("u0", "b b", None, "d")])
    vocab = build_vocabulary([corpus])
    assert vocab.types == ("b", "a")


def _labeled(n):
    return DomainCorpus("t", [ex(f"t-{i}", f"w{i}", i % 2, "t") for i in range(n)])


def test_split_sizes():
    split = split_validation(_labeled(200), 100, seed=3)
    assert len(split.validation) == 100 and len(split.pool) == 100
    ids = {e.id for e in split.validation} | {e.id for e in split.pool}
    assert len(ids) == 200


def test_split_deterministic():
    a = split_validation(_labeled(50), 10, seed=7)
    b = split_validation(_labeled(50), 10, seed=7)
    assert a == b


def test_split_zero():
    split = split_validation(_labeled(20), 0, seed=0)
    assert split.validation == () and len(split.pool) == 20


def test_split_too_large():
    with pytest.raises(ValueError):
        split_validation(_labeled(5), 6, seed=0)
