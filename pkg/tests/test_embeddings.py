import numpy as np
import pytest

from cmow import checkpoint, embeddings
from cmow.errors import ConfigError, DataError, StructuralError
from cmow.heads import init_classifier, init_mlm_head


class TestInit:
    def test_zero_noise_gives_exact_identity(self):
        t = embeddings.init("cmow-unidirectional", d=5, d_vec=0, n_vocab=7, sigma_init=0.0)
        for i in range(7):
            assert np.array_equal(t.forward[i], np.eye(5, dtype=np.float32))

    def test_paper_init_statistics(self):
        # diagonal entries ~ N(1, sigma^2), off-diagonal ~ N(0, sigma^2)
        sigma = 0.01
        t = embeddings.init("cmow-bidirectional", d=20, d_vec=0, n_vocab=500, sigma_init=sigma, seed=0, precision="wide")
        diag = np.stack([t.forward[i].diagonal() for i in range(500)])
        assert abs(diag.mean() - 1.0) < 3 * sigma / np.sqrt(diag.size)
        offdiag = t.forward[:, ~np.eye(20, dtype=bool)]
        assert abs(offdiag.mean()) < 3 * sigma / np.sqrt(offdiag.size)

    def test_same_seed_identical(self):
        a = embeddings.init("hybrid-bidirectional", 4, 3, 11, 0.01, seed=5)
        b = embeddings.init("hybrid-bidirectional", 4, 3, 11, 0.01, seed=5)
        assert np.array_equal(a.forward, b.forward)
        assert np.array_equal(a.backward, b.backward)
        assert np.array_equal(a.vectors, b.vectors)

    def test_different_seed_differs(self):
        a = embeddings.init("cbow", 0, 8, 11, 0.01, seed=5)
        b = embeddings.init("cbow", 0, 8, 11, 0.01, seed=6)
        assert not np.array_equal(a.vectors, b.vectors)

    def test_invalid_dims(self):
        with pytest.raises(ConfigError):
            embeddings.init("cbow", d=3, d_vec=4, n_vocab=5)
        with pytest.raises(ConfigError):
            embeddings.init("cmow-unidirectional", d=0, d_vec=0, n_vocab=5)
        with pytest.raises(ConfigError):
            embeddings.init("hybrid-unidirectional", d=3, d_vec=0, n_vocab=5)
        with pytest.raises(ConfigError):
            embeddings.init("nope", d=3, d_vec=0, n_vocab=5)

    def test_near_identity_start(self):
        # product of freshly initialized matrices stays O(n * sigma) from I
        sigma, n = 0.01, 16
        t = embeddings.init("cmow-unidirectional", d=20, d_vec=0, n_vocab=50, sigma_init=sigma, seed=1, precision="wide")
        rng = np.random.default_rng(2)
        ids = rng.integers(0, 50, size=n)
        acc = np.eye(20)
        for i in ids:
            acc = acc @ t.forward[i]
        dist = np.linalg.norm(acc - np.eye(20))
        # each factor is within ~sigma*d of I; allow a generous constant
        assert dist < 10 * n * sigma * 20


class TestParameterCount:
    def test_bidirectional_hybrid_paper_dims(self):
        t = embeddings.init("hybrid-bidirectional", 20, 400, 30522, sigma_init=0.0)
        count = embeddings.parameter_count(t)
        assert count == 30522 * (2 * 400 + 400) == 36_626_400
        assert round(count / 1e6) == 37  # the rounded headline figure

    def test_unidirectional_hybrid(self):
        t = embeddings.init("hybrid-unidirectional", 20, 400, 30522, sigma_init=0.0)
        assert embeddings.parameter_count(t) == 30522 * 800 == 24_417_600
        # plus a 3,202-parameter classifier this matches the reported
        # 24,420,802 whole-model figure
        assert 24_417_600 + 3_202 == 24_420_802

    def test_cbow_only(self):
        t = embeddings.init("cbow", 0, 4, 10, sigma_init=0.0)
        assert embeddings.parameter_count(t) == 40

    def test_invariant_under_updates(self):
        t = embeddings.init("hybrid-bidirectional", 3, 2, 5, 0.01, seed=0)
        before = embeddings.parameter_count(t)
        t.forward += 1.0
        t.vectors *= 2.0
        assert embeddings.parameter_count(t) == before


class TestLookup:
    def test_zero_noise_lookup(self):
        t = embeddings.init("hybrid-bidirectional", 3, 2, 5, sigma_init=0.0)
        fw, bw, vec = embeddings.lookup(t, 2)
        assert np.array_equal(fw, np.eye(3, dtype=np.float32))
        assert np.array_equal(bw, np.eye(3, dtype=np.float32))
        assert np.array_equal(vec, np.zeros(2, dtype=np.float32))

    def test_mutation_visibility(self):
        t = embeddings.init("cbow", 0, 4, 5, 0.01, seed=0)
        _, _, vec = embeddings.lookup(t, 1)
        t.vectors[1] += 10.0
        assert np.allclose(vec, t.vectors[1])

    def test_out_of_range(self):
        t = embeddings.init("cbow", 0, 4, 5, 0.01)
        with pytest.raises(StructuralError):
            embeddings.lookup(t, 5)


class TestCheckpoint:
    def test_table_round_trip(self, tmp_path):
        t = embeddings.init("hybrid-bidirectional", 4, 3, 11, 0.3, seed=7, precision="narrow")
        path = tmp_path / "model.cmow"
        checkpoint.save_checkpoint(path, t)
        loaded, mlm, clf = checkpoint.load_checkpoint(path, "narrow")
        assert mlm is None and clf is None
        assert loaded.kind == t.kind
        assert np.array_equal(loaded.forward, t.forward)
        assert np.array_equal(loaded.backward, t.backward)
        assert np.array_equal(loaded.vectors, t.vectors)

    def test_heads_round_trip(self, tmp_path):
        t = embeddings.init("hybrid-unidirectional", 4, 3, 11, 0.3, seed=7)
        mlm = init_mlm_head(19, 11, seed=1)
        clf = init_classifier("mlp", 19, 3, hidden_dim=5, seed=2)
        path = tmp_path / "model.cmow"
        checkpoint.save_checkpoint(path, t, mlm_head=mlm, classifier=clf)
        _, mlm2, clf2 = checkpoint.load_checkpoint(path)
        assert np.array_equal(mlm2.weight, mlm.weight)
        assert np.array_equal(mlm2.bias, mlm.bias)
        assert clf2.variant == "mlp"
        for attr in ("w1", "b1", "w2", "b2"):
            assert np.array_equal(getattr(clf2, attr), getattr(clf, attr))

    def test_linear_head_round_trip(self, tmp_path):
        t = embeddings.init("cbow", 0, 6, 9, 0.1, seed=3)
        clf = init_classifier("linear", 6, 2, seed=4)
        path = tmp_path / "model.cmow"
        checkpoint.save_checkpoint(path, t, classifier=clf)
        _, _, clf2 = checkpoint.load_checkpoint(path)
        assert clf2.variant == "linear"
        assert np.array_equal(clf2.w1, clf.w1)

    def test_corrupt_magic(self, tmp_path):
        path = tmp_path / "bad.cmow"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(DataError, match="magic"):
            checkpoint.load_checkpoint(path)

    def test_wide_load_casts(self, tmp_path):
        t = embeddings.init("cbow", 0, 4, 5, 0.1, seed=0, precision="narrow")
        path = tmp_path / "m.cmow"
        checkpoint.save_checkpoint(path, t)
        loaded, _, _ = checkpoint.load_checkpoint(path, "wide")
        assert loaded.vectors.dtype == np.float64
        assert np.allclose(loaded.vectors, t.vectors)
