"""Tests for the forecaster: config validation, feature extraction, graph
layers against naive per-node oracles, forward-pass structure, gradients,
and the checkpoint container."""

import numpy as np
import pytest

from tegnn.autodiff import ShapeError, Tensor
from tegnn.model import (
    ForecastModel,
    ModelConfig,
    complete_graph_adjacency,
    extract_features,
    forward,
    gin_layer,
    kgnn_layer,
    load_checkpoint,
    neighbor_matrix,
    save_checkpoint,
)


def naive_kgnn(h, adjacency, w1, w2, symmetric=False):
    """Per-node loop reference for the message-passing layer."""
    n = h.shape[0]
    out = np.zeros((n, w1.shape[1]))
    for i in range(n):
        acc = h[i] @ w1
        for j in range(n):
            if adjacency[j, i] > 0 or (symmetric and adjacency[i, j] > 0):
                acc = acc + h[j] @ w2
        out[i] = np.maximum(acc, 0.0)
    return out


def naive_gin(h, adjacency, eps, w1, w2, symmetric=False):
    n = h.shape[0]
    out = np.zeros((n, w2.shape[1]))
    for i in range(n):
        z = (1.0 + eps) * h[i]
        for j in range(n):
            if adjacency[j, i] > 0 or (symmetric and adjacency[i, j] > 0):
                z = z + h[j]
        out[i] = np.maximum(z @ w1, 0.0) @ w2
    return out


def random_graph(rng, n, density=0.3):
    adj = np.where(rng.random((n, n)) < density, rng.random((n, n)) * 0.5, 0.0)
    np.fill_diagonal(adj, 0.0)
    # directed adjacency never carries both orientations of an edge
    adj[np.tril_indices(n, -1)] *= (adj.T[np.tril_indices(n, -1)] == 0)
    return adj


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.kernel_sizes == (3, 5, 7)
        assert cfg.channels_per_kernel == 12
        assert cfg.gnn_hidden == (30, 10)
        assert cfg.window == 32
        assert cfg.variant == "kgnn"
        assert cfg.use_causality and cfg.use_cnn

    def test_feature_dim_closed_form(self):
        assert ModelConfig().feature_dim == 12 * (30 + 28 + 26)  # 1008
        assert ModelConfig(kernel_sizes=(3,)).feature_dim == 12 * 30
        assert ModelConfig(use_cnn=False).feature_dim == 32
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = int(rng.integers(4, 40))
            ks = tuple(int(k) for k in rng.integers(1, w + 1, size=rng.integers(1, 4)))
            c = int(rng.integers(1, 9))
            cfg = ModelConfig(kernel_sizes=ks, channels_per_kernel=c, window=w)
            assert cfg.feature_dim == sum(c * (w - k + 1) for k in ks)

    def test_kernel_longer_than_window_rejected_at_config_time(self):
        with pytest.raises(ValueError, match="kernel"):
            ModelConfig(kernel_sizes=(3, 40), window=32)

    def test_other_validation(self):
        with pytest.raises(ValueError, match="gnn_hidden"):
            ModelConfig(gnn_hidden=())
        with pytest.raises(ValueError, match="channels"):
            ModelConfig(channels_per_kernel=0)
        with pytest.raises(ValueError, match="variant"):
            ModelConfig(variant="gcn")
        with pytest.raises(ValueError, match="window"):
            ModelConfig(window=0, kernel_sizes=(1,))


class TestForecastModel:
    def test_parameter_shapes(self):
        m = ForecastModel(ModelConfig(), seed=0)
        p = m.named_parameters()
        assert p["conv3_weight"].shape == (12, 3)
        assert p["conv3_bias"].shape == (12,)
        assert p["gnn0_self"].shape == (1008, 30)
        assert p["gnn0_neighbor"].shape == (1008, 30)
        assert p["gnn1_self"].shape == (30, 10)
        assert p["readout_weight"].shape == (10,)
        assert p["readout_bias"].shape == ()

    def test_gin_parameters(self):
        m = ForecastModel(ModelConfig(variant="gin", gnn_hidden=(6, 4), window=8,
                                      kernel_sizes=(3,), channels_per_kernel=2), seed=0)
        p = m.named_parameters()
        assert p["gin0_eps"].shape == ()
        assert float(p["gin0_eps"].data) == 0.0
        assert p["gin0_lin1"].shape == (12, 6)
        assert p["gin0_lin2"].shape == (6, 6)
        assert p["gin1_lin1"].shape == (6, 4)

    def test_seeded_init_is_deterministic(self):
        a = ForecastModel(ModelConfig(), seed=5)
        b = ForecastModel(ModelConfig(), seed=5)
        c = ForecastModel(ModelConfig(), seed=6)
        for k in a.named_parameters():
            assert np.array_equal(a.params[k].data, b.params[k].data)
        assert any(
            not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params
        )

    def test_init_bounds_follow_fan_in(self):
        m = ForecastModel(ModelConfig(), seed=1)
        w = m.params["gnn0_self"].data
        assert np.max(np.abs(w)) <= 1.0 / np.sqrt(1008)
        k = m.params["conv3_weight"].data
        assert np.max(np.abs(k)) <= 1.0 / np.sqrt(3)

    def test_parameter_vector_round_trip(self):
        m = ForecastModel(ModelConfig(kernel_sizes=(3,), window=8, gnn_hidden=(5,)), seed=2)
        vec = m.parameter_vector()
        m2 = ForecastModel(m.config, seed=99)
        m2.load_parameter_vector(vec)
        for k in m.params:
            assert np.array_equal(m.params[k].data, m2.params[k].data)


class TestNeighborMatrix:
    def test_in_edges_are_columns(self):
        # edge 0 -> 1 (adjacency[0][1] > 0): node 1 aggregates node 0
        adj = np.array([[0.0, 0.7], [0.0, 0.0]])
        agg = neighbor_matrix(adj)
        np.testing.assert_array_equal(agg, [[0.0, 0.0], [1.0, 0.0]])

    def test_symmetric_unions_directions(self):
        adj = np.array([[0.0, 0.7], [0.0, 0.0]])
        agg = neighbor_matrix(adj, symmetric=True)
        np.testing.assert_array_equal(agg, [[0.0, 1.0], [1.0, 0.0]])

    def test_edge_weight_is_ignored(self):
        adj = np.array([[0.0, 123.4], [0.0, 0.0]])
        assert neighbor_matrix(adj).max() == 1.0

    def test_complete_graph(self):
        adj = complete_graph_adjacency(4)
        assert np.all(np.diag(adj) == 0)
        assert np.sum(adj) == 12

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError, match="square"):
            neighbor_matrix(np.zeros((2, 3)))


class TestKgnnLayer:
    def test_no_neighbors_identity_transform(self):
        h = np.abs(np.random.default_rng(0).normal(size=(4, 4)))
        out = kgnn_layer(Tensor(h), np.zeros((4, 4)), Tensor(np.eye(4)), Tensor(np.ones((4, 4))))
        np.testing.assert_array_equal(out.data, h)

    def test_directed_edge_isolation(self):
        # edge 0 -> 1 only: node 0's output ignores h_1
        rng = np.random.default_rng(1)
        adj = np.array([[0.0, 0.5], [0.0, 0.0]])
        w1, w2 = Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=(3, 2)))
        h1 = rng.normal(size=(2, 3))
        h2 = h1.copy()
        h2[1] += 10.0
        out1 = kgnn_layer(Tensor(h1), adj, w1, w2).data
        out2 = kgnn_layer(Tensor(h2), adj, w1, w2).data
        np.testing.assert_array_equal(out1[0], out2[0])
        expected = np.maximum(h1[1] @ w1.data + h1[0] @ w2.data, 0.0)
        np.testing.assert_allclose(out1[1], expected, atol=1e-15)

    def test_matches_naive_oracle(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 9))
            d_in, d_out = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            h = rng.normal(size=(n, d_in))
            adj = random_graph(rng, n)
            w1 = rng.normal(size=(d_in, d_out))
            w2 = rng.normal(size=(d_in, d_out))
            got = kgnn_layer(Tensor(h), adj, Tensor(w1), Tensor(w2)).data
            want = naive_kgnn(h, adj, w1, w2)
            assert np.max(np.abs(got - want)) <= 1e-12

    def test_symmetric_flag_matches_oracle(self):
        for seed in range(30):
            rng = np.random.default_rng(200 + seed)
            n = 5
            h = rng.normal(size=(n, 4))
            adj = random_graph(rng, n)
            w1, w2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
            got = kgnn_layer(Tensor(h), adj, Tensor(w1), Tensor(w2), symmetric=True).data
            want = naive_kgnn(h, adj, w1, w2, symmetric=True)
            assert np.max(np.abs(got - want)) <= 1e-12

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            kgnn_layer(Tensor(np.zeros((3, 4))), np.zeros((2, 2)),
                       Tensor(np.zeros((4, 2))), Tensor(np.zeros((4, 2))))


class TestGinLayer:
    def test_zero_eps_no_neighbors_is_mlp(self):
        rng = np.random.default_rng(2)
        h = rng.normal(size=(3, 4))
        w1, w2 = rng.normal(size=(4, 5)), rng.normal(size=(5, 5))
        out = gin_layer(Tensor(h), np.zeros((3, 3)), Tensor(np.zeros(())),
                        Tensor(w1), Tensor(w2)).data
        np.testing.assert_allclose(out, np.maximum(h @ w1, 0.0) @ w2, atol=1e-15)

    def test_matches_naive_oracle(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 9))
            d_in, d_out = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            h = rng.normal(size=(n, d_in))
            adj = random_graph(rng, n)
            eps = rng.normal() * 0.2
            w1 = rng.normal(size=(d_in, d_out))
            w2 = rng.normal(size=(d_out, d_out))
            got = gin_layer(Tensor(h), adj, Tensor(np.asarray(eps)),
                            Tensor(w1), Tensor(w2)).data
            want = naive_gin(h, adj, eps, w1, w2)
            assert np.max(np.abs(got - want)) <= 1e-12


def small_model(variant="kgnn", seed=0, use_cnn=True, use_causality=True):
    cfg = ModelConfig(
        kernel_sizes=(3, 5), channels_per_kernel=3, gnn_hidden=(8, 4), window=12,
        variant=variant, use_cnn=use_cnn, use_causality=use_causality,
    )
    return ForecastModel(cfg, seed=seed)


class TestExtractFeatures:
    def test_feature_dim_and_batching(self):
        m = small_model()
        x = np.random.default_rng(3).normal(size=(5, 4, 12))
        feats = extract_features(Tensor(x), m)
        assert feats.shape == (5, 4, m.config.feature_dim)
        single = extract_features(Tensor(x[2]), m)
        np.testing.assert_allclose(single.data, feats.data[2], atol=1e-15)

    def test_no_cnn_passthrough(self):
        m = small_model(use_cnn=False)
        x = np.random.default_rng(4).normal(size=(3, 12))
        feats = extract_features(Tensor(x), m)
        np.testing.assert_array_equal(feats.data, x)

    def test_features_nonnegative_after_relu(self):
        m = small_model()
        x = np.random.default_rng(5).normal(size=(3, 12))
        assert extract_features(Tensor(x), m).data.min() >= 0.0

    def test_window_length_mismatch(self):
        m = small_model()
        with pytest.raises(ShapeError, match="window"):
            extract_features(Tensor(np.zeros((3, 9))), m)


class TestForward:
    def test_output_shape(self):
        m = small_model()
        adj = random_graph(np.random.default_rng(0), 8)
        x = np.random.default_rng(1).normal(size=(6, 8, 12))
        out = forward(Tensor(x), adj, m)
        assert out.shape == (6, 8)
        out1 = forward(Tensor(x[0]), adj, m)
        assert out1.shape == (8,)

    def test_zero_parameters_give_zero_output(self):
        m = small_model()
        for p in m.params.values():
            p.data = np.zeros_like(p.data)
        adj = complete_graph_adjacency(4)
        out = forward(Tensor(np.random.default_rng(2).normal(size=(4, 12))), adj, m)
        np.testing.assert_array_equal(out.data, np.zeros(4))

    def test_zero_adjacency_isolates_nodes(self):
        m = small_model()
        rng = np.random.default_rng(6)
        x = rng.normal(size=(5, 12))
        base = forward(Tensor(x), np.zeros((5, 5)), m).data
        x2 = x.copy()
        x2[3] = rng.normal(size=12)
        out = forward(Tensor(x2), np.zeros((5, 5)), m).data
        unchanged = [i for i in range(5) if i != 3]
        np.testing.assert_array_equal(base[unchanged], out[unchanged])

    def test_graph_locality_reachability(self):
        # perturbing variable k leaves unreachable nodes' outputs unchanged
        for seed in range(10):
            rng = np.random.default_rng(400 + seed)
            n = 6
            m = small_model(seed=seed)
            adj = random_graph(rng, n, density=0.25)
            x = rng.normal(size=(n, 12))
            k = int(rng.integers(0, n))
            x2 = x.copy()
            x2[k] *= 2.0
            base = forward(Tensor(x), adj, m).data
            pert = forward(Tensor(x2), adj, m).data
            reach = np.eye(n, dtype=bool) | (adj > 0)
            closure = reach.copy()
            for _ in range(n):
                closure = closure | (closure @ reach)
            unreachable = [i for i in range(n) if not closure[k, i]]
            np.testing.assert_array_equal(base[unreachable], pert[unreachable])

    def test_permutation_equivariance(self):
        # BLAS reorders neighbor summation under relabeling, so equality
        # holds to float noise rather than bit-exactly
        for seed in range(20):
            rng = np.random.default_rng(500 + seed)
            n = int(rng.integers(3, 9))
            m = small_model(seed=seed, variant="gin" if seed % 2 else "kgnn")
            adj = random_graph(rng, n)
            x = rng.normal(size=(n, 12))
            perm = rng.permutation(n)
            out = forward(Tensor(x), adj, m).data
            out_p = forward(Tensor(x[perm]), adj[np.ix_(perm, perm)], m).data
            np.testing.assert_allclose(out_p, out[perm], atol=1e-12)

    def test_gin_variant_runs(self):
        m = small_model(variant="gin")
        adj = random_graph(np.random.default_rng(7), 4)
        out = forward(Tensor(np.random.default_rng(8).normal(size=(4, 12))), adj, m)
        assert out.shape == (4,)
        assert np.all(np.isfinite(out.data))

    def test_no_causality_ignores_adjacency(self):
        m = small_model(use_causality=False)
        x = np.random.default_rng(9).normal(size=(4, 12))
        out_none = forward(Tensor(x), None, m).data
        out_adj = forward(Tensor(x), np.eye(4), m).data
        np.testing.assert_array_equal(out_none, out_adj)

    def test_adjacency_size_mismatch(self):
        m = small_model()
        with pytest.raises(ShapeError, match="adjacency"):
            forward(Tensor(np.zeros((4, 12))), np.zeros((3, 3)), m)

    def test_missing_adjacency_rejected(self):
        m = small_model()
        with pytest.raises(ValueError, match="adjacency"):
            forward(Tensor(np.zeros((4, 12))), None, m)


class TestEndToEndGradient:
    def test_loss_gradient_matches_finite_differences(self):
        from tegnn.training import l1_loss

        for seed in range(3):
            rng = np.random.default_rng(600 + seed)
            variant = "gin" if seed == 2 else "kgnn"
            m = small_model(seed=seed, variant=variant)
            n = 4
            adj = random_graph(rng, n)
            x = rng.normal(size=(3, n, 12))
            y = rng.normal(size=(3, n))

            def loss_value():
                return float(l1_loss(forward(Tensor(x), adj, m), Tensor(y)).data)

            loss = l1_loss(forward(Tensor(x), adj, m), Tensor(y))
            loss.backward()
            for name, p in m.named_parameters().items():
                flat = p.data.ravel()
                gflat = p.grad.ravel()
                idx = rng.integers(0, flat.size, size=min(4, flat.size))
                for i in idx:
                    orig = flat[i]
                    flat[i] = orig + 1e-5
                    up = loss_value()
                    flat[i] = orig - 1e-5
                    down = loss_value()
                    flat[i] = orig
                    fd = (up - down) / 2e-5
                    assert abs(gflat[i] - fd) <= 1e-3 * max(1.0, abs(fd)), (name, i)
            m.zero_grad()


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        m = small_model(seed=3)
        meta = {"variable_names": ["a", "b"], "scale": [1.5, 2.5], "horizon": 5}
        extras = {"adjacency": np.array([[0.0, 0.2], [0.0, 0.0]])}
        path = tmp_path / "model.ckpt"
        save_checkpoint(m, path, metadata=meta, arrays=extras)
        loaded, meta2, extras2 = load_checkpoint(path)
        assert loaded.config == m.config
        assert meta2 == meta
        for k in m.params:
            assert np.array_equal(loaded.params[k].data, m.params[k].data)
        np.testing.assert_array_equal(extras2["adjacency"], extras["adjacency"])

    def test_save_is_byte_deterministic(self, tmp_path):
        m = small_model(seed=4)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(m, p1, metadata={"seed": 4})
        save_checkpoint(m, p2, metadata={"seed": 4})
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_round_trips_bytes(self, tmp_path):
        m = small_model(seed=5)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(m, p1, metadata={"x": [1.0, 0.1]})
        loaded, meta, _ = load_checkpoint(p1)
        save_checkpoint(loaded, p2, metadata=meta)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(path)

    def test_extra_name_collision_rejected(self, tmp_path):
        m = small_model()
        with pytest.raises(ValueError, match="collide"):
            save_checkpoint(m, tmp_path / "x.ckpt", arrays={"readout_bias": np.zeros(1)})
