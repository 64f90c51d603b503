"""Decision oracles: labels, query accounting, file loading, spec strings."""

import threading

import numpy as np
import pytest

from autoda.oracles import (
    HalfspaceOracle,
    MlpFormatError,
    MlpOracle,
    SphereOracle,
    load_mlp,
    parse_oracle_spec,
    random_mlp,
)


class TestHalfspace:
    def test_label_rule(self):
        o = HalfspaceOracle(np.array([1.0, 0.0]), 0.0)
        assert o.decide(np.array([0.5, 0.0]))
        assert not o.decide(np.array([-0.5, 3.0]))
        assert not o.decide(np.array([0.0, 0.0]))  # boundary is benign

    def test_optimal_distance(self):
        o = HalfspaceOracle(np.array([1.0, 0.0]), 0.0)
        assert o.optimal_distance(np.array([-1.0, 0.0])) == 1.0
        o2 = HalfspaceOracle(np.array([3.0, 4.0]), 0.0)
        assert o2.optimal_distance(np.array([-5.0, 0.0])) == pytest.approx(3.0)

    def test_query_counter_exact(self):
        o = HalfspaceOracle(np.ones(4), 0.0)
        for _ in range(37):
            o.query(np.zeros(4))
        assert o.queries == 37
        o.decide(np.zeros(4))  # decide() is the uncounted setup entry point
        assert o.queries == 37

    def test_counter_is_thread_safe(self):
        o = HalfspaceOracle(np.ones(4), 0.0)

        def worker():
            for _ in range(1000):
                o.add_queries(1)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert o.queries == 8000

    def test_dimension_mismatch(self):
        o = HalfspaceOracle(np.ones(4), 0.0)
        with pytest.raises(ValueError):
            o.decide(np.zeros(5))


class TestSphere:
    def test_adversarial_outside(self):
        o = SphereOracle(np.zeros(2), 1.0, "outside")
        assert o.decide(np.array([2.0, 0.0]))
        assert not o.decide(np.array([0.5, 0.0]))
        assert not o.decide(np.array([1.0, 0.0]))  # on the sphere is benign

    def test_adversarial_inside(self):
        o = SphereOracle(np.zeros(2), 1.0, "inside")
        assert o.decide(np.array([0.5, 0.0]))
        assert not o.decide(np.array([2.0, 0.0]))

    def test_optimal_distance(self):
        o = SphereOracle(np.zeros(2), 2.0, "outside")
        assert o.optimal_distance(np.array([1.0, 0.0])) == 1.0
        assert o.optimal_distance(np.zeros(2)) == 2.0


MLP_TEXT = """\
layers: 2
2 3
1.0 0.0 1.0
0.0 1.0 -1.0
0.5 -0.5
3 2
1.0 0.0
0.0 1.0
1.0 1.0
0.0 0.0 0.0
"""


class TestMlp:
    def test_load_and_decide(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text(MLP_TEXT)
        oracle = load_mlp(str(path), benign_label=0)
        assert oracle.dim == 3
        out = oracle.scores(np.array([1.0, 0.0, 0.0]))
        assert out.shape == (3,)

    def test_differential_vs_halfspace(self, tmp_path):
        # one affine layer computing (0, w.x + b): decisions match the halfspace
        w = np.array([0.5, -1.5, 2.0])
        b = 0.25
        text = "layers: 1\n2 3\n0.0 0.0 0.0\n" + " ".join(str(v) for v in w) + \
               f"\n0.0 {b}\n"
        path = tmp_path / "hs.txt"
        path.write_text(text)
        mlp = load_mlp(str(path), benign_label=0)
        hs = HalfspaceOracle(w, b)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            x = rng.standard_normal(3)
            assert mlp.decide(x) == hs.decide(x)

    def test_argmax_identity_layer(self):
        layers = [(np.eye(2), np.zeros(2))]
        oracle = MlpOracle(layers, benign_label=0)
        assert not oracle.decide(np.array([2.0, 1.0]))
        assert oracle.decide(np.array([1.0, 2.0]))

    def test_truncated_file_names_byte_offset(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(MLP_TEXT[:40])
        with pytest.raises(MlpFormatError) as exc:
            load_mlp(str(path))
        assert "byte" in str(exc.value)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("layerz: 1\n")
        with pytest.raises(MlpFormatError):
            load_mlp(str(path))

    def test_dimension_chain_mismatch(self, tmp_path):
        text = "layers: 2\n2 3\n1 0 0\n0 1 0\n0 0\n2 4\n1 0 0 0\n0 1 0 0\n0 0\n"
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(MlpFormatError):
            load_mlp(str(path))


class TestSpecStrings:
    def test_halfspace_spec(self):
        o = parse_oracle_spec("halfspace:w=1,0,0;b=-0.5")
        assert isinstance(o, HalfspaceOracle)
        assert o.dim == 3
        assert o.decide(np.array([1.0, 0.0, 0.0]))
        assert not o.decide(np.array([0.0, 0.0, 0.0]))

    def test_sphere_spec(self):
        o = parse_oracle_spec("sphere:c=0,0;r=1;adv=outside")
        assert isinstance(o, SphereOracle)
        assert o.decide(np.array([3.0, 0.0]))

    def test_mlp_spec(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text(MLP_TEXT)
        o = parse_oracle_spec(f"mlp:path={path};benign=1")
        assert isinstance(o, MlpOracle)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            parse_oracle_spec("parabola:a=1")

    def test_randmlp_spec(self):
        o = parse_oracle_spec("randmlp:dim=8;hidden=16,8;seed=3;spread=2")
        assert isinstance(o, MlpOracle)
        assert o.dim == 8


class TestRandomMlp:
    def test_deterministic(self):
        a = random_mlp(6, (12,), seed=7)
        b = random_mlp(6, (12,), seed=7)
        x = np.linspace(-1.0, 1.0, 6)
        assert a.query(x) == b.query(x)
        assert a.queries == b.queries == 1

    def test_seed_changes_network(self):
        a = random_mlp(6, (12,), seed=7)
        b = random_mlp(6, (12,), seed=8)
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((200, 6))
        labels_a = [a.decide(p) for p in pts]
        labels_b = [b.decide(p) for p in pts]
        assert labels_a != labels_b

    def test_both_labels_reachable(self):
        o = random_mlp(8, (16, 8), seed=1, spread=3.0)
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((500, 8)) * 3.0
        labels = {o.decide(p) for p in pts}
        assert labels == {True, False}

    def test_kernel_parity(self):
        # python decide() and the compiled kernel must agree bit-for-bit
        from autoda import kernels

        o = random_mlp(10, (20, 10), seed=4, spread=1.5)
        kind, ovec, b, sign = o.kernel_params()
        rng = np.random.default_rng(2)
        for _ in range(200):
            x = rng.standard_normal(10) * 2.0
            assert o.decide(x) == bool(
                kernels.oracle_decide(kind, ovec, b, sign, x)
            )
