"""
Test cases for the tensor and reverse-mode differentiation engine.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import Graph, ParameterStore, Tensor, forward_primitive, finite_difference_check
from autodiff import ops
from autodiff.checkpoint import check_compatible, load_checkpoint, save_checkpoint
from core.exceptions import CheckpointError, DomainError, NumericsError, ShapeError


def _store(seed=0, **shapes):
    rng = np.random.default_rng(seed)
    return ParameterStore({name: rng.uniform(-1.0, 1.0, size=shape) for name, shape in shapes.items()})


class TestForwardPrimitives:
    """Worked forward examples."""

    def test_matmul_identity(self):
        """Multiplying by the identity returns the left operand."""
        out = forward_primitive("matmul", [Tensor([[1, 2], [3, 4]]), Tensor([[1, 0], [0, 1]])])
        assert np.array_equal(out.data, [[1, 2], [3, 4]])

    def test_masked_softmax_zeroes_masked_position(self):
        """Masked positions are exactly zero and the rest split evenly."""
        out = forward_primitive("masked-softmax", [Tensor([0.0, 0.0, 0.0])], mask=np.array([True, True, False]))
        assert out.data.tolist() == [0.5, 0.5, 0.0]

    def test_gaussian_log_density_standard_2d(self):
        """Standard 2-D Gaussian at its mean is -log(2 pi)."""
        out = forward_primitive(
            "gaussian-log-density",
            [Tensor([0.0, 0.0]), Tensor([[0.0, 0.0]]), Tensor([1.0])],
        )
        assert out.data[0] == pytest.approx(-1.837877, abs=1e-6)

    def test_shape_mismatch(self):
        """Incompatible matmul shapes raise ShapeError."""
        with pytest.raises(ShapeError):
            forward_primitive("matmul", [Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3)))])

    def test_unknown_kind(self):
        with pytest.raises(ShapeError):
            forward_primitive("conv2d", [Tensor([1.0])])

    def test_non_finite_output(self):
        """exp overflow surfaces as NumericsError."""
        with pytest.raises(NumericsError):
            forward_primitive("exp", [Tensor([1e4])])

    def test_non_positive_sigma(self):
        with pytest.raises(DomainError):
            forward_primitive(
                "gaussian-log-density",
                [Tensor([0.0]), Tensor([[0.0]]), Tensor([0.0])],
            )

    def test_logsumexp_overflow_safe(self):
        """Logits of magnitude 1e3 stay finite."""
        out = forward_primitive("log-sum-exp", [Tensor([1e3, 1e3, -1e3])])
        assert out.data == pytest.approx(1e3 + np.log(2.0))

    def test_tensor_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0


class TestMaskedSoftmax:
    """Normalisation over unmasked positions."""

    def test_rows_sum_to_one(self):
        """Random logits and masks: unmasked entries sum to 1, masked are 0."""
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 7))
        mask = rng.random((20, 7)) < 0.6
        mask[:, 0] = True
        out = forward_primitive("masked-softmax", [Tensor(x)], mask=mask).data
        assert np.all(out[~mask] == 0.0)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)


class TestBackward:
    """Reverse sweep examples and contracts."""

    def test_square_gradient(self):
        """d/dx sum(x * x) at x=3 is 6."""
        params = ParameterStore({"x": np.array([3.0])})
        g = Graph(params)
        x = g.param("x")
        grads = g.backward(ops.sum_(x * x))
        assert grads["x"].tolist() == [6.0]

    def test_softmax_cross_entropy_uniform(self):
        """Uniform logits over n classes: true-class gradient is 1/n - 1."""
        n = 4
        params = ParameterStore({"z": np.zeros(n)})
        g = Graph(params)
        z = g.param("z")
        picked = ops.reshape(ops.gather(ops.reshape(z, (n, 1)), np.array([0])), ())
        loss = ops.sub(ops.logsumexp(z), picked)
        grads = g.backward(loss)
        assert grads["z"][0] == pytest.approx(1.0 / n - 1.0)
        assert grads["z"][1] == pytest.approx(1.0 / n)

    def test_non_scalar_loss(self):
        params = ParameterStore({"x": np.ones(3)})
        g = Graph(params)
        with pytest.raises(ShapeError):
            g.backward(g.param("x"))

    def test_unused_parameter_gets_zeros(self):
        params = ParameterStore({"x": np.ones(2), "unused": np.ones((2, 2))})
        g = Graph(params)
        g.param("unused")
        grads = g.backward(ops.sum_(g.param("x")))
        assert np.array_equal(grads["unused"], np.zeros((2, 2)))

    def test_graph_reusable(self):
        """Backward twice on the same graph gives identical gradients."""
        params = _store(w=(3, 3), x=(2, 3))
        g = Graph(params)
        loss = ops.sum_(ops.gelu(ops.matmul(g.param("x"), g.param("w"))))
        first = g.backward(loss)
        second = g.backward(loss)
        for name in first:
            assert np.array_equal(first[name], second[name])

    def test_deterministic(self):
        """Two independent forward+backward passes agree bitwise."""
        def run():
            params = _store(seed=4, w=(4, 3), b=(3,), x=(5, 4))
            g = Graph(params)
            h = ops.linear(g.param("x"), g.param("w"), g.param("b"))
            loss = ops.mean(ops.logsumexp(h))
            return loss.value.copy(), g.backward(loss)

        v1, g1 = run()
        v2, g2 = run()
        assert np.array_equal(v1, v2)
        for name in g1:
            assert np.array_equal(g1[name], g2[name])


class TestGradientCheck:
    """Analytic gradients against central differences on inputs in [-1, 1]."""

    TOL = 1e-4

    def test_linear_layer(self):
        params = _store(w=(6, 4), b=(4,), x=(5, 6))

        def build(g):
            h = ops.linear(g.param("x"), g.param("w"), g.param("b"))
            return ops.sum_(h * h)

        for name in ("w", "b", "x"):
            assert finite_difference_check(build, params, name) < 1e-6

    def test_layer_norm(self):
        params = _store(x=(4, 8), gamma=(8,), beta=(8,), w=(8, 8))

        def build(g):
            h = ops.layer_norm(g.param("x"), g.param("gamma"), g.param("beta"))
            return ops.sum_(ops.gelu(ops.matmul(h, g.param("w"))))

        for name in ("x", "gamma", "beta"):
            assert finite_difference_check(build, params, name) < self.TOL

    def test_attention_pieces(self):
        """Masked softmax, transpose, reshape and matmul over >= 100 coordinates."""
        params = _store(seed=2, x=(2, 5, 12), w=(12, 12))
        mask = np.tril(np.ones((5, 5), dtype=bool))[None, None]

        def build(g):
            x = g.param("x")
            q = ops.transpose(ops.reshape(ops.matmul(x, g.param("w")), (2, 5, 2, 6)), (0, 2, 1, 3))
            k = ops.transpose(ops.reshape(x, (2, 5, 2, 6)), (0, 2, 3, 1))
            probs = ops.masked_softmax(ops.matmul(q, k), mask)
            return ops.mean(ops.matmul(probs, q))

        for name in ("x", "w"):
            assert finite_difference_check(build, params, name, num_coords=120) < self.TOL

    def test_gather_concat_clip_exp(self):
        params = _store(seed=3, table=(10, 4), other=(6, 3))
        idx = np.array([1, 3, 3, 7, 0, 9])

        def build(g):
            rows = ops.gather(g.param("table"), idx)
            joined = ops.concat([rows, g.param("other")])
            return ops.sum_(ops.exp(ops.clip(joined, -0.5, 0.5)))

        for name in ("table", "other"):
            assert finite_difference_check(build, params, name) < self.TOL

    def test_masked_logsumexp(self):
        params = _store(seed=5, z=(4, 9))
        mask = np.random.default_rng(5).random((4, 9)) < 0.5
        mask[:, 0] = True

        def build(g):
            return ops.sum_(ops.logsumexp(g.param("z"), mask=mask))

        assert finite_difference_check(build, params, "z") < self.TOL

    def test_gaussian_log_density(self):
        params = _store(seed=6, x=(3, 4), mu=(3, 2, 4))
        params.add("log_sigma", np.random.default_rng(6).uniform(-0.5, 0.5, size=(3, 2)))

        def build(g):
            sigma = ops.exp(g.param("log_sigma"))
            dens = ops.gaussian_log_density(g.param("x"), g.param("mu"), sigma)
            return ops.sum_(ops.logsumexp(dens))

        for name in ("x", "mu", "log_sigma"):
            assert finite_difference_check(build, params, name) < self.TOL

    def test_restores_parameters(self):
        params = _store(w=(3, 3))
        before = params.snapshot()
        finite_difference_check(lambda g: ops.sum_(ops.relu(g.param("w"))), params, "w")
        assert np.array_equal(params["w"], before["w"])


class TestCheckpoint:
    """Binary checkpoint container."""

    def test_save_load(self, tmp_path):
        params = _store(a=(2, 3), b=(4,))
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, params, {"seed": 7, "config_hash": "abc"})
        loaded, meta = load_checkpoint(path)
        assert meta == {"seed": 7, "config_hash": "abc"}
        assert loaded.names() == ["a", "b"]
        assert np.array_equal(loaded["a"], params["a"])
        assert not os.path.exists(path + ".partial")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / "nope.ckpt"))

    def test_truncated(self, tmp_path):
        params = _store(a=(8, 8))
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, params)
        data = open(path, "rb").read()
        with open(path, "wb") as f:
            f.write(data[:-10])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_incompatible_shapes(self):
        with pytest.raises(CheckpointError):
            check_compatible(_store(a=(2, 3)), _store(a=(3, 3)))
        with pytest.raises(CheckpointError):
            check_compatible(_store(a=(2, 3)), _store(b=(2, 3)))
