import numpy as np
import pytest

from stc.params import (
    CHECKPOINT_MAGIC,
    ParamSet,
    finite_diff_check,
    load_params,
    save_params,
    sgd_step,
)


def make_params(**arrays) -> ParamSet:
    ps = ParamSet()
    for name, v in arrays.items():
        ps.add(name, v)
    return ps


class TestSgdStep:
    def test_vanilla_sgd_decreases_by_lr_times_grad(self):
        ps = make_params(w=[1.0, 2.0])
        ps["w"].grad[:] = [3.0, -1.0]
        sgd_step(ps, lr=0.1, momentum=0.0, weight_decay=0.0)
        assert np.allclose(ps["w"].value, [1.0 - 0.3, 2.0 + 0.1])

    def test_zero_grad_zero_velocity_is_noop(self):
        ps = make_params(w=[4.0])
        sgd_step(ps, lr=0.5, momentum=0.9, weight_decay=0.0)
        assert ps["w"].value[0] == 4.0

    def test_two_momentum_steps_hand_unrolled(self):
        # constant grad g: updates lr*g then lr*1.9*g
        ps = make_params(w=[0.0])
        lr, g = 0.01, 2.0
        for _ in range(2):
            ps["w"].grad[:] = g
            sgd_step(ps, lr=lr, momentum=0.9, weight_decay=0.0)
        assert ps["w"].value[0] == pytest.approx(-lr * g * (1.0 + 1.9), abs=1e-15)

    def test_weight_decay_enters_velocity(self):
        ps = make_params(w=[10.0])
        sgd_step(ps, lr=0.1, momentum=0.0, weight_decay=0.5)
        assert ps["w"].value[0] == pytest.approx(10.0 - 0.1 * 0.5 * 10.0)

    def test_nonfinite_grad_names_parameter(self):
        ps = make_params(good=[1.0], bad=[1.0])
        ps["bad"].grad[:] = np.nan
        with pytest.raises(ValueError, match="bad"):
            sgd_step(ps, lr=0.1, momentum=0.0, weight_decay=0.0)

    def test_grads_zeroed_after_step(self):
        ps = make_params(w=[1.0])
        ps["w"].grad[:] = 5.0
        sgd_step(ps, lr=0.1, momentum=0.9, weight_decay=0.0)
        assert ps["w"].grad[0] == 0.0

    def test_reduces_quadratic_loss(self):
        ps = make_params(w=[3.0, -2.0])
        loss = lambda: float((ps["w"].value ** 2).sum())
        before = loss()
        for _ in range(5):
            ps["w"].grad[:] = 2.0 * ps["w"].value
            sgd_step(ps, lr=0.05, momentum=0.0, weight_decay=0.0)
            after = loss()
            assert after < before
            before = after

    def test_subset_shares_parameters(self):
        ps = make_params(a=[1.0], b=[2.0])
        sub = ps.subset(["b"])
        sub["b"].grad[:] = 1.0
        sgd_step(sub, lr=1.0, momentum=0.0, weight_decay=0.0)
        assert ps["b"].value[0] == 1.0
        assert ps["a"].value[0] == 1.0


class TestFiniteDiffCheck:
    def test_quadratic_gradient_matches(self):
        ps = make_params(w=[3.0])
        ps["w"].grad[:] = 6.0  # d/dw w^2 at w=3
        err = finite_diff_check(lambda p: float(p["w"].value[0] ** 2), ps)
        assert err < 1e-9

    def test_corrupted_gradient_detected(self):
        ps = make_params(w=[3.0])
        ps["w"].grad[:] = 12.0  # doubled on purpose
        err = finite_diff_check(lambda p: float(p["w"].value[0] ** 2), ps)
        assert err == pytest.approx(0.5, abs=1e-6)


class TestCheckpoint:
    def test_round_trip(self, tmp_path, ):
        rng = np.random.default_rng(7)
        ps = make_params(
            **{"conv1.weight": rng.normal(size=(4, 3, 3, 3)), "conv1.bias": np.zeros(4)}
        )
        ps["conv1.bias"].grad[:] = 9.0
        ps["conv1.bias"].velocity[:] = 9.0
        path = tmp_path / "net.stcp"
        save_params(ps, path)
        back = load_params(path)
        assert back.names() == ps.names()
        for name in ps.names():
            assert np.array_equal(back[name].value, ps[name].value)
            # gradient and velocity are not serialized
            assert not back[name].grad.any()
            assert not back[name].velocity.any()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.stcp"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_params(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.stcp"
        path.write_bytes(CHECKPOINT_MAGIC + (99).to_bytes(4, "little") + (0).to_bytes(4, "little"))
        with pytest.raises(ValueError, match="version"):
            load_params(path)

    def test_truncated_file_names_path(self, tmp_path):
        ps = make_params(w=np.ones((8, 8)))
        path = tmp_path / "net.stcp"
        save_params(ps, path)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError, match="truncated"):
            load_params(path)

    def test_serialization_is_deterministic(self, tmp_path):
        ps = make_params(a=np.arange(6.0).reshape(2, 3), b=[1.5])
        p1, p2 = tmp_path / "a.stcp", tmp_path / "b.stcp"
        save_params(ps, p1)
        save_params(ps, p2)
        assert p1.read_bytes() == p2.read_bytes()


def test_duplicate_name_rejected():
    ps = make_params(w=[1.0])
    with pytest.raises(ValueError, match="duplicate"):
        ps.add("w", [2.0])
