import math

import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon as scipy_js

from dataselect.corpus import Example
from dataselect.metrics import (
    FeatureConfig,
    FeatureMatrix,
    TargetRepresentations,
    bhattacharyya,
    build_feature_matrix,
    cosine_similarity,
    diversity_features,
    euclidean_distance,
    jensen_shannon,
    kl_divergence,
    quadratic_entropy,
    renyi_divergence,
    renyi_entropy,
    score_examples,
    shannon_entropy,
    similarity_features,
    simpson_index,
    variational_distance,
    z_normalize,
)
from dataselect.representations import EmbeddingTable, term_distribution

from conftest import vocab_of

EPS = 1e-10


def kl_oracle(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        if pi > 0:
            total += pi * math.log(pi / qi)
    return total


def smooth_oracle(p, eps=EPS):
    s = [x + eps for x in p]
    z = sum(s)
    return [x / z for x in s]


def test_kl_matches_literal_sum():
    p, q = [0.5, 0.5], [0.9, 0.1]
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert kl_divergence(p, q) == pytest.approx(expected, abs=1e-15)


def test_js_identity_and_disjoint():
    assert jensen_shannon([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert jensen_shannon([1, 0], [0, 1]) == pytest.approx(math.log(2), abs=1e-12)


def test_js_two_term_oracle():
    p, q = [0.5, 0.5], [0.9, 0.1]
    m = [0.7, 0.3]
    expected = 0.5 * kl_oracle(p, m) + 0.5 * kl_oracle(q, m)
    assert jensen_shannon(p, q) == pytest.approx(expected, abs=1e-14)
    # scipy returns the square root of the divergence
    assert jensen_shannon(p, q) == pytest.approx(scipy_js(p, q) ** 2, abs=1e-12)


def test_renyi_identity():
    p = [0.1, 0.6, 0.3]
    assert renyi_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


def test_renyi_closed_form_alpha_two():
    assert renyi_divergence([0.5, 0.5], [0.25, 0.75], alpha=2, epsilon=1e-15) == pytest.approx(
        math.log(4 / 3), abs=1e-9)


def test_renyi_close_to_kl(rng):
    for _ in range(100):
        p = smooth_oracle(rng.dirichlet(np.ones(20)))
        q = smooth_oracle(rng.dirichlet(np.ones(20)))
        kl = kl_oracle(p, q)
        assert abs(renyi_divergence(p, q, alpha=0.99) - kl) / kl < 0.02


def test_renyi_rejects_alpha_one():
    with pytest.raises(ValueError):
        renyi_divergence([0.5, 0.5], [0.5, 0.5], alpha=1)


def test_bhattacharyya():
    assert bhattacharyya([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)
    assert bhattacharyya([1, 0], [0, 1]) == pytest.approx(-math.log(1 / EPS))
    expected = math.log(math.sqrt(0.45) + math.sqrt(0.05))
    assert bhattacharyya([0.5, 0.5], [0.9, 0.1]) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(-0.1116, abs=1e-4)


def test_cosine():
    assert cosine_similarity([2, 3], [2, 3]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        cosine_similarity([0, 0], [1, 0])


def test_euclidean(rng):
    assert euclidean_distance([1, 2], [1, 2]) == 0.0
    assert euclidean_distance([0, 0], [3, 4]) == 5.0
    u, v = rng.normal(size=7), rng.normal(size=7)
    assert euclidean_distance(u, v) == pytest.approx(math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v))))


def test_variational():
    assert variational_distance([0.4, 0.6], [0.4, 0.6]) == 0.0
    assert variational_distance([1, 0], [0, 1]) == 2.0
    assert variational_distance([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.8)


@pytest.mark.parametrize("fn", [kl_divergence, jensen_shannon, renyi_divergence, euclidean_distance,
                                variational_distance, cosine_similarity, bhattacharyya])
def test_dimension_mismatch(fn):
    with pytest.raises(ValueError):
        fn([0.5, 0.5], [0.2, 0.3, 0.5])


def test_entropies_uniform():
    for k in (1, 2, 5, 17):
        p = np.full(k, 1.0 / k)
        assert shannon_entropy(p) == pytest.approx(math.log(k), abs=1e-12)
        assert simpson_index(p) == pytest.approx(-1.0 / k, abs=1e-12)
        # the stated form 1/(alpha-1) log sum p^alpha is the negated textbook value
        assert renyi_entropy(p) == pytest.approx(-math.log(k), abs=1e-9)


def test_diversity_counts():
    vocab = vocab_of(["a", "b"], [0.5, 0.5])
    types, ttr, ent, simpson, renyi, quad = diversity_features(["a", "a", "b"], vocab)
    assert types == 2 and ttr == pytest.approx(2 / 3)
    assert ent == pytest.approx(math.log(2))
    assert simpson == pytest.approx(-0.5)
    assert renyi == pytest.approx(-math.log(2))
    assert quad == 0.0


def test_diversity_renormalizes_corpus_probabilities():
    vocab = vocab_of(["a", "b", "c"], [0.6, 0.2, 0.2])
    feats = diversity_features(["a", "b"], vocab)
    p = np.array([0.75, 0.25])
    assert feats[2] == pytest.approx(-(p * np.log(p)).sum())
    assert feats[3] == pytest.approx(-(p**2).sum())


def test_diversity_needs_vocab():
    with pytest.raises(ValueError):
        diversity_features(["zz"], vocab_of("ab"))


def test_quadratic_entropy_identical_embeddings():
    table = EmbeddingTable({"a": np.array([1.0, 2.0]), "b": np.array([1.0, 2.0])}, 2)
    assert quadratic_entropy(["a", "b"], [0.5, 0.5], table) == pytest.approx(1.0)


def test_quadratic_entropy_hand_expansion():
    table = EmbeddingTable({"a": np.array([1.0, 0.0]), "b": np.array([1.0, 1.0])}, 2)
    p = [0.25, 0.75]
    c = 1 / math.sqrt(2)
    expected = p[0] * p[0] + 2 * c * p[0] * p[1] + p[1] * p[1]
    assert quadratic_entropy(["a", "b"], p, table) == pytest.approx(expected)


def test_quadratic_entropy_skips_missing():
    table = EmbeddingTable({"a": np.array([1.0, 0.0])}, 2)
    assert quadratic_entropy(["a", "b"], [0.5, 0.5], table) == pytest.approx(0.25)


def test_similarity_identity():
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(similarity_features(p, p, "term"), [0, 0, 0, 1, 0, 0], atol=1e-12)


def test_similarity_embedding_has_three():
    u = np.array([1.0, -2.0, 0.5])
    assert similarity_features(u, u, "embedding").shape == (3,)


def test_similarity_disjoint():
    p, q = [1.0, 0.0], [0.0, 1.0]
    ps, qs = smooth_oracle(p), smooth_oracle(q)
    renyi = math.log(sum(a**0.99 * b**0.01 for a, b in zip(ps, qs))) / (0.99 - 1)
    expected = [math.log(2), renyi, math.log(EPS), 0.0, math.sqrt(2), 2.0]
    np.testing.assert_allclose(similarity_features(p, q, "term"), expected, rtol=1e-9)


def test_similarity_kind_mismatch():
    with pytest.raises(ValueError):
        similarity_features([0.5, 0.5], [0.5, 0.5], "lexical")
    with pytest.raises(ValueError):
        similarity_features([0.5, 0.5], [1.0], "term")


def test_column_counts():
    assert len(FeatureConfig(("term",), True, True).column_names()) == 12
    assert len(FeatureConfig(("term", "topic", "embedding"), True, True).column_names()) == 21
    assert FeatureConfig(("embedding",), True, False).column_names() == [
        "embedding:cosine", "embedding:euclidean", "embedding:variational"]


def test_feature_config_identifier():
    a = FeatureConfig(("term",), True, True)
    assert a.identifier() == FeatureConfig.from_dict(a.to_dict()).identifier()
    assert a.identifier() != FeatureConfig(("topic",), True, True).identifier()
    sub = FeatureConfig(("term",), True, False, columns=("term:js",), negate=("term:js",))
    assert sub.column_names() == ["term:js"]
    assert sub.needs == {"term"}
    with pytest.raises(ValueError):
        FeatureConfig(("term",), True, False, columns=("div:types",))


def _pool(texts):
    return [Example(f"x{i}", tuple(t.split())) for i, t in enumerate(texts)]


def test_feature_matrix_constant_column():
    vocab = vocab_of("abc")
    target = TargetRepresentations(vocab, term=term_distribution(["a", "b", "c"], vocab))
    pool = _pool(["a b", "a c", "b c"])
    fm = build_feature_matrix(pool, target, FeatureConfig(("term",), True, True))
    assert fm.shape == (3, 12)
    assert np.isfinite(fm.values).all()
    types = fm.columns.index("div:types")
    np.testing.assert_array_equal(fm.values[:, types], 0.0)
    np.testing.assert_allclose(fm.values.mean(axis=0), 0.0, atol=1e-12)


def test_feature_matrix_negate_and_ids():
    vocab = vocab_of("abc")
    target = TargetRepresentations(vocab, term=term_distribution(["a"], vocab))
    pool = _pool(["a", "a b", "c"])
    cfg = FeatureConfig(("term",), True, False, columns=("term:js",), negate=("term:js",))
    fm = build_feature_matrix(pool, target, cfg)
    assert fm.ids == ("x0", "x1", "x2")
    assert fm.raw[0, 0] == 0.0 and fm.raw[2, 0] == pytest.approx(-math.log(2))
    assert np.argmax(fm.values[:, 0]) == 0


def test_feature_matrix_reports_bad_example():
    vocab = vocab_of("ab")
    target = TargetRepresentations(vocab, term=term_distribution(["a"], vocab))
    with pytest.raises(ValueError, match="x1"):
        build_feature_matrix(_pool(["a", "zz"]), target, FeatureConfig(("term",), True, True))


def test_feature_matrix_csv_round_trip(tmp_path):
    vocab = vocab_of("abc")
    target = TargetRepresentations(vocab, term=term_distribution(["a", "b"], vocab))
    fm = build_feature_matrix(_pool(["a", "a b", "c b", "c"]), target, FeatureConfig())
    fm.to_csv(tmp_path / "f.tsv")
    back = FeatureMatrix.from_csv(tmp_path / "f.tsv")
    np.testing.assert_array_equal(back.values, fm.values)
    assert back.columns == fm.columns and back.ids == fm.ids and back.config_id == fm.config_id


def test_z_normalize():
    values, mean, std = z_normalize(np.array([[1.0, 5.0], [3.0, 5.0]]))
    np.testing.assert_allclose(values, [[-1, 0], [1, 0]])
    np.testing.assert_allclose(mean, [2, 5])


def test_score_examples():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(score_examples(m, [0, 0]), [0, 0])
    np.testing.assert_array_equal(score_examples(m, [0, 1]), m[:, 1])
    np.testing.assert_array_equal(score_examples(m, [1, -1]), [-1, -1])
    with pytest.raises(ValueError):
        score_examples(m, [1, 2, 3])
