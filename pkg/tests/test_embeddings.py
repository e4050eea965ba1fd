import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trolldetect.embeddings import (
    DEFAULT_CLUSTERS,
    EmbeddingTable,
    kmeans,
    load_clusters,
    load_vectors,
    nearest,
    save_clusters,
    save_vectors,
    train_skipgram,
)

from oracles import all_partitions_sse, brute_force_2means


def cooccurrence_corpus(seed=0, n=1000):
    """Half the sentences hold both "кафе" and "чаша"; the other half hold "сол"."""
    rng = np.random.default_rng(seed)
    g1 = [f"a{i}" for i in range(20)]
    g2 = [f"b{i}" for i in range(20)]
    out = []
    for i in range(n):
        if i % 2:
            s = [str(w) for w in rng.choice(g1, 6)]
            s.insert(int(rng.integers(7)), "кафе")
            s.insert(int(rng.integers(8)), "чаша")
        else:
            s = [str(w) for w in rng.choice(g2, 7)]
            s.insert(int(rng.integers(8)), "сол")
        out.append(s)
    return out


@pytest.fixture(scope="module")
def sgns():
    return train_skipgram(cooccurrence_corpus(), dim=20, window=3, negatives=5, min_count=5, seed=0)


def cos(table, a, b):
    u = table.unit()
    return float(u[table.index(a)] @ u[table.index(b)])


def table_of(points):
    return EmbeddingTable([f"w{i}" for i in range(len(points))], np.asarray(points, dtype=float))


class TestSkipGram:
    def test_cooccurring_pair_more_similar(self, sgns):
        assert cos(sgns, "кафе", "чаша") > cos(sgns, "кафе", "сол")
        assert cos(sgns, "кафе", "чаша") > cos(sgns, "чаша", "сол")

    def test_min_count_drops_rare_word(self):
        corpus = cooccurrence_corpus(n=200)
        for s in corpus[:3]:
            s.append("рядко")
        table = train_skipgram(corpus, dim=8, window=2, min_count=5, seed=1)
        assert "рядко" not in table and "кафе" in table

    def test_same_seed_same_table(self):
        corpus = cooccurrence_corpus(n=150)
        a = train_skipgram(corpus, dim=8, window=2, seed=3)
        b = train_skipgram(corpus, dim=8, window=2, seed=3)
        assert a.words == b.words and np.array_equal(a.matrix, b.matrix)

    def test_finite(self, sgns):
        assert np.isfinite(sgns.matrix).all()
        assert sgns.dim == 20

    def test_corpus_smaller_than_window(self):
        with pytest.raises(ValueError, match="window"):
            train_skipgram([["a", "b"]] * 2, dim=4, window=5, min_count=1)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            train_skipgram(cooccurrence_corpus(n=20), dim=0)


class TestVectorFiles:
    def test_load_hundred_by_fifty(self, tmp_path):
        rng = np.random.default_rng(0)
        p = tmp_path / "v.txt"
        p.write_text("".join(f"w{i} " + " ".join(f"{x:.5f}" for x in rng.normal(size=50)) + "\n" for i in range(100)))
        t = load_vectors(p)
        assert (t.vocab_size, t.dim) == (100, 50)

    def test_short_row_named(self, tmp_path):
        p = tmp_path / "v.txt"
        rows = ["a " + " ".join(["1"] * 50), "b " + " ".join(["1"] * 49), "c " + " ".join(["1"] * 50)]
        p.write_text("\n".join(rows) + "\n")
        with pytest.raises(ValueError, match=r":2: row for 'b' has 49 values"):
            load_vectors(p)

    def test_duplicate_last_wins(self, tmp_path, caplog):
        p = tmp_path / "v.txt"
        p.write_text("a 1 0\nb 0 1\na 2 2\n")
        with caplog.at_level(logging.WARNING):
            t = load_vectors(p)
        assert t.vocab_size == 2 and list(t["a"]) == [2.0, 2.0]
        assert "duplicate" in caplog.text

    def test_header_line_skipped(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("2 3\na 1 2 3\nb 4 5 6\n")
        assert load_vectors(p).dim == 3

    def test_empty_file(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("")
        with pytest.raises(ValueError, match="no vectors"):
            load_vectors(p)

    def test_round_trip(self, tmp_path):
        t = table_of([[0.5, -1.25], [3.0, 1e-3]])
        save_vectors(t, tmp_path / "v.txt")
        back = load_vectors(tmp_path / "v.txt")
        assert back.words == t.words and np.allclose(back.matrix, t.matrix)


class TestKMeans:
    four = [(0, 0), (0, 1), (10, 10), (10, 11)]

    def test_four_points_match_brute_force(self):
        sse, cents = brute_force_2means(self.four)
        m = kmeans(table_of(self.four), k=2, seed=0)
        got = sorted(tuple(map(float, c)) for c in m.centroids)
        assert np.allclose(got, cents) and m.inertia == pytest.approx(sse)
        assert got == [(0.0, 0.5), (10.0, 10.5)]

    def test_k_equals_vocab(self):
        pts = np.random.default_rng(1).normal(size=(12, 3))
        m = kmeans(table_of(pts), k=12, seed=0)
        assert m.inertia == pytest.approx(0.0, abs=1e-12)
        assert len(set(m.labels.tolist())) == 12

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kmeans(table_of(self.four), k=5)

    def test_default_k(self):
        assert DEFAULT_CLUSTERS == 5372

    def test_save_and_load(self, tmp_path):
        m = kmeans(table_of(self.four), k=2, seed=0)
        save_clusters(m, tmp_path / "c.tsv")
        back = load_clusters(tmp_path / "c.tsv")
        assert back.assignment == m.assignment and np.allclose(back.centroids, m.centroids)

    @given(arrays(np.float64, st.tuples(st.integers(5, 40), st.integers(1, 4)), elements=st.floats(-50, 50)), st.integers(1, 5), st.integers(0, 3))
    @settings(max_examples=60, deadline=None)
    def test_objective_monotone_and_assignment_nearest(self, X, k, seed):
        m = kmeans(table_of(X), k=min(k, len(X)), seed=seed)
        h = m.history
        assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(h, h[1:]))
        d = ((X[:, None, :] - m.centroids[None, :, :]) ** 2).sum(axis=2)
        chosen = d[np.arange(len(X)), m.labels]
        assert np.all(chosen <= d.min(axis=1) + 1e-9)

    @given(arrays(np.float64, (6, 2), elements=st.floats(-10, 10)), st.integers(0, 5))
    @settings(max_examples=30, deadline=None)
    def test_never_better_than_exhaustive_optimum(self, X, seed):
        m = kmeans(table_of(X), k=2, seed=seed)
        assert m.inertia >= all_partitions_sse([tuple(p) for p in X], 2) - 1e-9


class TestNearest:
    t = EmbeddingTable(["a", "dup", "b", "c"], np.array([[1, 0], [1, 0], [0, 1], [1, 1]], dtype=float))

    def test_duplicate_first(self):
        assert nearest(self.t, "a", 1) == [("dup", 1.0)]

    def test_orthogonal_zero(self):
        sims = dict(nearest(self.t, "b", 3))
        assert sims["a"] == 0.0 and sims["dup"] == 0.0

    def test_k_beyond_vocab(self):
        out = nearest(self.t, "a", 10)
        assert [w for w, _ in out] == ["dup", "c", "b"]

    def test_ties_lexicographic(self):
        assert [w for w, _ in nearest(self.t, "b", 3)][1:] == ["a", "dup"]

    def test_oov(self):
        with pytest.raises(KeyError):
            nearest(self.t, "zzz", 1)

    @given(arrays(np.float64, (5, 3), elements=st.floats(-5, 5)))
    def test_symmetric(self, M):
        t = EmbeddingTable(list("vwxyz"), M)
        for a in t.words:
            for b, s in nearest(t, a, 4):
                back = dict(nearest(t, b, 4))[a]
                assert abs(s - back) < 1e-12
