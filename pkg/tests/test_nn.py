import numpy as np
import pytest

from idiomce.errors import BadMagic, InvalidShape, NonFiniteLoss, ShapeMismatch, TruncatedFile
from idiomce.nn import (
    AdamState,
    ParamStore,
    finite_difference_check,
    init_params,
    load_checkpoint,
    optimizer_step,
    save_checkpoint,
)


def test_init_deterministic_for_seed():
    shapes = [("w", (4, 6)), ("b", (4,))]
    a = init_params(shapes, seed=7)
    b = init_params(shapes, seed=7)
    assert a == b
    c = init_params(shapes, seed=8)
    assert not np.array_equal(a["w"], c["w"])


def test_bias_vectors_zero():
    params = init_params([("w", (3, 3)), ("b", (5,))], seed=0)
    assert np.all(params["b"] == 0)


def test_xavier_bound_large_matrix():
    # Bound oracle: sqrt(6 / (64 + 1536)).
    params = init_params([("w", (64, 1536))], seed=1)
    bound = np.sqrt(6.0 / (64 + 1536))
    w = params["w"]
    assert np.all(np.abs(w) <= bound)
    assert np.max(np.abs(w)) > 0.5 * bound  # actually spans the range


def test_invalid_shape():
    with pytest.raises(InvalidShape):
        init_params([("w", (0, 3))], seed=0)
    with pytest.raises(InvalidShape):
        init_params([("w", (2, 3, 4))], seed=0)


def test_param_store_shape_frozen():
    store = ParamStore({"w": np.zeros((2, 2))})
    with pytest.raises(ShapeMismatch):
        store["w"] = np.zeros((3, 3))


def test_adam_zero_gradient_fixed_point():
    params = init_params([("w", (3, 3))], seed=0)
    before = params.copy()
    state = AdamState(params)
    optimizer_step(params, params.zeros_like(), state)
    assert state.step == 1
    assert params == before


def test_adam_first_step_closed_form():
    # With g = 1 constantly: m_hat = v_hat = 1, so the first step moves the
    # parameter by exactly -lr / (1 + eps).
    params = ParamStore({"w": np.zeros(1, dtype=np.float64)})
    grads = ParamStore({"w": np.ones(1, dtype=np.float64)})
    state = AdamState(params, lr=0.001)
    optimizer_step(params, grads, state)
    expected = -0.001 / (1.0 + 1e-8)
    assert params["w"][0] == pytest.approx(expected, rel=1e-12)
    assert params["w"][0] == pytest.approx(-0.001, abs=1e-6)


def test_adam_per_parameter_independence():
    rng = np.random.default_rng(0)
    arrays = {"a": rng.normal(size=(3, 3)), "b": rng.normal(size=4)}
    grads = {"a": rng.normal(size=(3, 3)), "b": rng.normal(size=4)}

    p1 = ParamStore({k: v.copy() for k, v in arrays.items()})
    s1 = AdamState(p1)
    optimizer_step(p1, ParamStore(grads), s1)

    # Same update driven through a reordered store.
    p2 = ParamStore({k: arrays[k].copy() for k in ("b", "a")})
    s2 = AdamState(p2)
    optimizer_step(p2, ParamStore({k: grads[k] for k in ("b", "a")}), s2)
    assert np.array_equal(p1["a"], p2["a"])
    assert np.array_equal(p1["b"], p2["b"])


def test_adam_shape_mismatch():
    params = ParamStore({"w": np.zeros((2, 2))})
    state = AdamState(params)
    with pytest.raises(ShapeMismatch):
        optimizer_step(params, ParamStore({"w": np.zeros((2, 2)), "x": np.zeros(1)}), state)


def test_fd_quadratic_exact_gradient():
    # loss = 0.5 * ||theta||^2 has gradient theta.
    def loss_and_grad(params):
        theta = params["theta"]
        return 0.5 * float(np.sum(theta ** 2)), ParamStore({"theta": theta.copy()})

    params = ParamStore({"theta": np.array([1.0, 2.0])})
    err = finite_difference_check(loss_and_grad, params, eps=1e-5)
    assert err < 1e-6


def test_fd_constant_loss():
    def loss_and_grad(params):
        return 3.5, ParamStore({"theta": np.zeros_like(params["theta"])})

    params = ParamStore({"theta": np.array([0.3, -0.2])})
    err = finite_difference_check(loss_and_grad, params, eps=1e-5)
    assert err == pytest.approx(0.0, abs=1e-9)


def test_fd_nonfinite_loss():
    def loss_and_grad(params):
        return float("nan"), params.zeros_like()

    with pytest.raises(NonFiniteLoss):
        finite_difference_check(loss_and_grad, ParamStore({"t": np.ones(1)}), 1e-5)


def test_fd_detects_wrong_gradient():
    def loss_and_grad(params):
        theta = params["theta"]
        return 0.5 * float(np.sum(theta ** 2)), ParamStore({"theta": 2.0 * theta})

    err = finite_difference_check(loss_and_grad, ParamStore({"theta": np.array([1.0])}), 1e-5)
    assert err > 0.4


# --- checkpoint container -----------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    params = init_params([("sage1.weight", (4, 8)), ("sage1.bias", (4,)),
                          ("mlp2.weight", (1, 4)), ("mlp2.bias", (1,))], seed=3)
    path = tmp_path / "m.idcm"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded == params
    assert loaded["sage1.bias"].ndim == 1
    assert loaded["mlp2.weight"].shape == (1, 4)
    assert loaded["mlp2.bias"].shape == (1,)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.idcm"
    path.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(BadMagic):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    params = init_params([("w", (4, 4))], seed=0)
    path = tmp_path / "t.idcm"
    save_checkpoint(params, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(TruncatedFile):
        load_checkpoint(path)


def test_checkpoint_deterministic_bytes(tmp_path):
    params = init_params([("w", (4, 4)), ("b", (4,))], seed=0)
    save_checkpoint(params, tmp_path / "a.idcm")
    save_checkpoint(params, tmp_path / "b.idcm")
    assert (tmp_path / "a.idcm").read_bytes() == (tmp_path / "b.idcm").read_bytes()
