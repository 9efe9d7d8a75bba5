import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vidsum.clustering import (DEFAULT_TAU, ClusterAssignment, EmbeddingSet, build_graph,
                               chinese_whispers, counts_from_embeddings,
                               default_salience_min, face_counts, read_embeddings_csv,
                               write_embeddings_csv)
from vidsum.errors import InputError


def brute_edges(X, tau):
    m = len(X)
    return {(a, b) for a in range(m) for b in range(m)
            if a != b and np.linalg.norm(X[a] - X[b]) < tau}


def edges(adj):
    return {(a, int(b)) for a, row in enumerate(adj) for b in row}


def test_graph_examples():
    X = np.random.default_rng(0).random((6, 4))
    assert not edges(build_graph(X, 0.0))
    same = np.vstack([np.ones(128), np.ones(128)])
    assert edges(build_graph(same, 0.1)) == {(0, 1), (1, 0)}
    assert DEFAULT_TAU == 0.6
    with pytest.raises(InputError):
        build_graph(X, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2), st.floats(0, 1))
def test_graph_matches_brute_force_and_monotone(seed, tau, extra):
    X = np.random.default_rng(seed).random((15, 3))
    e = edges(build_graph(X, tau, block=4))
    brute = brute_edges(X, tau)
    # allow disagreement only for pairs sitting on the threshold
    for a, b in e ^ brute:
        assert abs(np.linalg.norm(X[a] - X[b]) - tau) < 1e-9
    assert e <= edges(build_graph(X, tau + extra))


def test_whispers_examples():
    assert chinese_whispers([np.array([], int)] * 4).n_clusters == 4
    m = 7
    complete = [np.array([j for j in range(m) if j != i]) for i in range(m)]
    assert chinese_whispers(complete).n_clusters == 1
    cliques = [np.array([j for j in range(4) if j != i]) for i in range(4)]
    cliques += [np.array([j for j in range(4, 9) if j != i]) for i in range(4, 9)]
    res = chinese_whispers(cliques, seed=3)
    assert res.n_clusters == 2
    assert len(set(res.labels[:4])) == 1 and len(set(res.labels[4:])) == 1


def _partition(labels):
    groups = {}
    for i, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(i)
    return sorted(map(tuple, groups.values()))


def test_whispers_seed_determinism_and_relabel_equivalence():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(0, 0.05, (10, 8)), rng.normal(3, 0.05, (12, 8))])
    adj = build_graph(X)
    a, b = chinese_whispers(adj, seed=5), chinese_whispers(adj, seed=5)
    assert np.array_equal(a.labels, b.labels)
    assert _partition(chinese_whispers(adj, seed=9).labels) == _partition(a.labels)


def test_face_count_examples():
    emb = EmbeddingSet(np.zeros((10, 4)), np.array([0, 0, 0, 2, 2, 2, 2, 2, 2, 2]))
    assign = ClusterAssignment(np.zeros(10, int), 1)
    counts = face_counts(assign, emb, 4, salience_min=5)
    assert counts[0].tolist() == [3, 3] and counts[1].tolist() == [0, 0]
    rng = np.random.default_rng(2)
    assign = ClusterAssignment(rng.integers(0, 5, 10), 1)
    counts = face_counts(assign, emb, 4, salience_min=1)
    assert np.array_equal(counts[:, 0], counts[:, 1])


def test_default_salience_and_empty():
    assert default_salience_min(10) == 2 and default_salience_min(1000) == 10
    assert not counts_from_embeddings(EmbeddingSet.empty(), 5).any()
    with pytest.raises(InputError):
        counts_from_embeddings(EmbeddingSet(np.zeros((1, 4)), np.array([7])), 5)


def test_embeddings_csv_round_trip(tmp_path):
    emb = EmbeddingSet(np.random.default_rng(3).random((4, 128)), np.array([0, 0, 3, 5]))
    write_embeddings_csv(tmp_path / "e.csv", emb)
    back = read_embeddings_csv(tmp_path / "e.csv")
    assert np.array_equal(back.vectors, emb.vectors)
    assert back.frame_of.tolist() == [0, 0, 3, 5]
