import numpy as np
import pytest

from graphexplore.graphnet import (
    GraphNet,
    GraphNetConfig,
    GraphObservation,
    PretrainConfig,
    adjacency,
    attention_readout,
    edge_auc,
    empty_observation,
    feature_provider,
    encode_graph,
    message_pass,
    obs_from_text,
    obs_to_text,
    pad_coverage_bit,
    pretrain_structural,
    structural_embeddings,
)
from graphexplore.tensor import ParamSet, Tensor, grad_check, reduce_sum, sigmoid


def make_obs(n, edges, num_edge_types=2, feature_width=3, coverage=None, seed=0):
    rng = np.random.default_rng(seed)
    return GraphObservation(
        node_count=n,
        node_features=rng.normal(size=(n, feature_width)),
        edges=edges,
        coverage=np.zeros(n) if coverage is None else np.asarray(coverage, dtype=np.float64),
        num_edge_types=num_edge_types,
    )


def both_ways(pairs, k=1):
    out = []
    for u, v in pairs:
        out.append((u, v, k))
        out.append((v, u, k))
    return out


def make_net(seed=0, **kwargs):
    params = ParamSet(seed=seed)
    config = GraphNetConfig(**{"d": 8, "rounds": 2, "feature_width": 3, **kwargs})
    return params, GraphNet(params, "enc", config)


def test_pad_coverage_bit_masks():
    obs = make_obs(4, [], coverage=[0, 0, 0, 0])
    padded = pad_coverage_bit(obs)
    assert padded.shape == (4, 4)
    assert np.array_equal(padded[:, -1], np.zeros(4))
    obs.coverage = np.ones(4)
    assert np.array_equal(pad_coverage_bit(obs)[:, -1], np.ones(4))


def test_pad_coverage_bit_width_contract():
    obs = make_obs(2, [], feature_width=7)
    assert pad_coverage_bit(obs).shape[1] == 8


def test_single_node_matches_handrolled_gru():
    # One node, no edges: each round applies the GRU to (zero message, state).
    params, net = make_net()
    obs = make_obs(1, [])
    out = message_pass(obs, net).data

    h = net.project_features(obs)
    zero = Tensor(np.zeros((1, net.config.d)))
    for _ in range(net.config.rounds):
        h = net.gru(zero, h)
    assert np.allclose(out, h.data, atol=1e-12)


def test_permutation_equivariance_of_node_embeddings():
    params, net = make_net(seed=4)
    edges = both_ways([(0, 1), (1, 2), (2, 3)]) + both_ways([(0, 3)], k=2)
    obs = make_obs(4, edges, coverage=[1, 0, 0, 1], seed=4)
    out = message_pass(obs, net).data

    perm = np.array([2, 0, 3, 1])  # new index of each old node
    inv = np.argsort(perm)
    permuted = GraphObservation(
        node_count=4,
        node_features=obs.node_features[inv],
        edges=[(perm[u], perm[v], k) for u, v, k in obs.edges],
        coverage=obs.coverage[inv],
        num_edge_types=obs.num_edge_types,
    )
    out_perm = message_pass(permuted, net).data
    assert np.allclose(out_perm, out[inv], atol=1e-12)


def test_rounds_must_be_positive():
    params = ParamSet(seed=0)
    with pytest.raises(ValueError, match="rounds"):
        GraphNet(params, "enc", GraphNetConfig(rounds=0))


def test_one_round_sees_one_hop_only():
    # Path 0-1-2: with one round the end nodes (degree 1) must differ from the
    # middle node (degree 2) even with identical starting features.
    params, net = make_net(rounds=1)
    obs = make_obs(3, both_ways([(0, 1), (1, 2)]))
    obs.node_features = np.ones((3, 3))
    out = message_pass(obs, net).data
    assert np.allclose(out[0], out[2], atol=1e-12)  # symmetric ends
    assert not np.allclose(out[0], out[1], atol=1e-6)


def test_receptive_field_limited_by_rounds():
    # Perturbing node 0's features must not reach nodes farther than L hops.
    for rounds in (1, 2):
        params, net = make_net(rounds=rounds)
        edges = both_ways([(0, 1), (1, 2), (2, 3), (3, 4)])
        base = make_obs(5, edges, seed=8)
        bumped = GraphObservation(
            node_count=5,
            node_features=base.node_features.copy(),
            edges=edges,
            coverage=base.coverage,
            num_edge_types=base.num_edge_types,
        )
        bumped.node_features[0] += 1.0
        a = message_pass(base, net).data
        b = message_pass(bumped, net).data
        changed = ~np.all(np.isclose(a, b, atol=1e-12), axis=1)
        for v in range(5):
            if v > rounds:
                assert not changed[v], f"node {v} changed with {rounds} rounds"
        assert changed[0]


def test_unknown_edge_type_errors():
    params, net = make_net()
    obs = make_obs(2, [(0, 1, 5)], num_edge_types=2)
    with pytest.raises(ValueError, match="edge type"):
        message_pass(obs, net)


def test_readout_identical_embeddings_symmetric():
    params, net = make_net()
    emb = Tensor(np.tile(np.arange(8.0), (2, 1)))
    g, alpha = attention_readout(emb, net)
    assert np.allclose(alpha.data, [0.5, 0.5])
    assert np.allclose(g.data, emb.data[0])


def test_readout_single_node():
    params, net = make_net()
    emb = Tensor(np.random.default_rng(2).normal(size=(1, 8)))
    g, alpha = attention_readout(emb, net)
    assert np.allclose(alpha.data, [1.0])
    assert np.allclose(g.data, emb.data[0])


def test_attention_weights_nonnegative_sum_to_one():
    params, net = make_net(seed=9)
    rng = np.random.default_rng(10)
    for n in (1, 3, 11):
        emb = Tensor(rng.normal(scale=3.0, size=(n, 8)))
        _, alpha = attention_readout(emb, net)
        assert np.all(alpha.data >= 0.0)
        assert abs(float(alpha.data.sum()) - 1.0) < 1e-6


def test_graph_vector_permutation_invariant():
    params, net = make_net(seed=5)
    edges = both_ways([(0, 1), (1, 2), (0, 2), (2, 3)])
    obs = make_obs(4, edges, coverage=[0, 1, 0, 1], seed=5)
    g1 = encode_graph(obs, net).graph_vector.data

    perm = np.array([3, 1, 0, 2])
    inv = np.argsort(perm)
    permuted = GraphObservation(
        node_count=4,
        node_features=obs.node_features[inv],
        edges=[(perm[u], perm[v], k) for u, v, k in obs.edges],
        coverage=obs.coverage[inv],
        num_edge_types=obs.num_edge_types,
    )
    g2 = encode_graph(permuted, net).graph_vector.data
    assert np.allclose(g1, g2, atol=1e-9)


def test_empty_graph_uses_learned_constant():
    params, net = make_net()
    emb = encode_graph(empty_observation(3, 2), net)
    assert emb.graph_vector is net.empty_vec
    assert emb.node_embeddings.data.shape == (0, 8)


def test_coverage_mask_changes_graph_vector():
    params, net = make_net(seed=6)
    edges = both_ways([(0, 1), (1, 2)])
    a = make_obs(3, edges, coverage=[0, 0, 0], seed=6)
    b = make_obs(3, edges, coverage=[1, 0, 1], seed=6)
    ga = encode_graph(a, net).graph_vector.data
    gb = encode_graph(b, net).graph_vector.data
    assert np.linalg.norm(ga - gb) > 0.0


def test_encode_graph_deterministic():
    params, net = make_net(seed=7)
    obs = make_obs(4, both_ways([(0, 1), (1, 2), (2, 3)]), coverage=[1, 0, 0, 0], seed=7)
    a = encode_graph(obs, net)
    b = encode_graph(obs, net)
    assert np.array_equal(a.graph_vector.data, b.graph_vector.data)
    assert np.array_equal(a.node_embeddings.data, b.node_embeddings.data)


def test_encoder_gradients_match_finite_differences():
    rng = np.random.default_rng(12)
    for trial in range(20):
        params = ParamSet(seed=trial)
        net = GraphNet(
            params, "enc", GraphNetConfig(d=5, rounds=2, feature_width=2, message_hidden=(5,))
        )
        n = 5
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.4]
        edges = both_ways(pairs) + both_ways([(0, 1)], k=2)
        obs = GraphObservation(
            node_count=n,
            node_features=rng.normal(size=(n, 2)),
            edges=edges,
            coverage=(rng.random(n) < 0.5).astype(np.float64),
            num_edge_types=2,
        )

        def fn(p):
            emb = encode_graph(obs, net)
            return reduce_sum(sigmoid(emb.graph_vector))

        err = grad_check(fn, params.named(), eps=1e-5)
        assert err < 1e-4, f"trial {trial}: {err}"


def test_aggregate_modes_differ():
    obs = make_obs(3, both_ways([(0, 1), (0, 2)]), seed=13)
    outs = {}
    for mode in ("sum", "mean", "max"):
        params, net = make_net(seed=13, aggregate=mode)
        outs[mode] = message_pass(obs, net).data
    assert not np.allclose(outs["sum"], outs["mean"])
    assert not np.allclose(outs["sum"], outs["max"])


def test_text_serialization_roundtrip():
    obs = make_obs(3, [(0, 1, 1), (1, 0, 1), (1, 2, 2)], coverage=[1, 0, 1], seed=14)
    text = obs_to_text(obs)
    lines = text.splitlines()
    assert lines[0] == "nodes=3 edge_types=2"
    assert lines[1].startswith("v 1 ")
    assert lines[-1] == "e 1 2 2"
    back = obs_from_text(text)
    assert back.node_count == 3
    assert np.array_equal(back.coverage, obs.coverage)
    assert np.array_equal(back.node_features, obs.node_features)
    assert back.edges == obs.edges


def test_text_rejects_malformed():
    with pytest.raises(ValueError):
        obs_from_text("nodes=2 edge_types=1\nv 0 0.0\n")  # missing a node line
    with pytest.raises(ValueError):
        obs_from_text("nodes=1 edge_types=1\nx what\n")


# ------------------------------------------------------------- pretraining


def featureless(n, edges, num_edge_types=1):
    return GraphObservation(
        node_count=n,
        node_features=np.zeros((n, 1)),
        edges=edges,
        coverage=np.zeros(n),
        num_edge_types=num_edge_types,
    )


def test_pretrain_path_graph_loss_drops():
    path = featureless(3, both_ways([(0, 1), (1, 2)]))
    config = PretrainConfig(d=6, rounds=2, steps=200, batch=2, lr=3e-3, seed=0)
    result = pretrain_structural(lambda rng: path, config)
    assert result.losses[-1] < result.losses[0]


def test_pretrain_complete_graph_symmetry():
    k4 = featureless(4, both_ways([(i, j) for i in range(4) for j in range(i + 1, 4)]))
    config = PretrainConfig(d=6, rounds=2, steps=50, batch=1, lr=1e-3, seed=1)
    result = pretrain_structural(lambda rng: k4, config)
    h = structural_embeddings(result, k4)
    for i in range(1, 4):
        assert np.allclose(h[0], h[i], atol=1e-6)


def test_adjacency_helper():
    obs = featureless(3, [(0, 1, 1), (1, 0, 1), (2, 0, 1)])
    a = adjacency(obs)
    assert a[0, 1] == 1.0 and a[1, 0] == 1.0 and a[2, 0] == 1.0 and a[0, 2] == 0.0


def random_featureless_er(rng, lo=7, hi=10, p=0.3):
    n = int(rng.integers(lo, hi + 1))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.extend([(i, j, 1), (j, i, 1)])
    return featureless(n, edges)


def test_pretrain_held_out_edge_auc():
    config = PretrainConfig(d=8, rounds=2, steps=150, batch=4, lr=3e-3, seed=3)
    result = pretrain_structural(random_featureless_er, config)
    assert result.losses[-1] < result.losses[0]
    heldout_rng = np.random.default_rng(999)
    heldout = [random_featureless_er(heldout_rng) for _ in range(20)]
    assert edge_auc(result, heldout) > 0.6


def test_pretrain_aborts_on_non_finite_loss():
    bad = GraphObservation(
        node_count=1,
        node_features=np.array([[np.nan]]),
        edges=[],
        coverage=np.zeros(1),
        num_edge_types=1,
    )
    config = PretrainConfig(d=4, rounds=1, steps=5, batch=1, seed=0)
    with pytest.raises(RuntimeError, match="non-finite loss at step 0"):
        pretrain_structural(lambda rng: bad, config)


def test_feature_provider_shape_and_determinism():
    path = featureless(3, both_ways([(0, 1), (1, 2)]))
    config = PretrainConfig(d=6, rounds=2, steps=20, batch=1, seed=0)
    result = pretrain_structural(lambda rng: path, config)
    provide = feature_provider(result)
    assert provide.width == 6
    # ignores input features and coverage: only topology matters
    dressed = GraphObservation(
        node_count=3,
        node_features=np.ones((3, 5)),
        edges=path.edges,
        coverage=np.ones(3),
        num_edge_types=1,
    )
    a, b = provide(path), provide(dressed)
    assert a.shape == (3, 6)
    assert np.array_equal(a, b)
    assert provide(featureless(0, [])).shape == (0, 6)
