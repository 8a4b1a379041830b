"""Hand-checked coefficient values and structural properties of the models."""

import math
from fractions import Fraction

import numpy as np
import pytest

from mvsde.errors import ConfigError, ModelEvaluationError
from mvsde.measure import EmpiricalView
from mvsde.models import (ModelSpec, builtin, builtin_names, eval_diffusion,
                          eval_drift, eval_neutral)


def view(*values):
    return EmpiricalView(np.atleast_2d(np.asarray(values, dtype=float)).T)


def views_for(model, means=None):
    """One single-sample view per lag with the requested means."""
    r = model.n_lags
    d = model.dim_state
    if means is None:
        means = [np.zeros(d)] * r
    return [EmpiricalView(np.asarray(m, dtype=float).reshape(1, d)) for m in means]


class TestExample1:
    def setup_method(self):
        self.model = builtin("example1")

    def test_lags(self):
        assert self.model.lags == (0, Fraction(1, 5), Fraction(1, 4),
                                   Fraction(2, 5), Fraction(1, 2), 2)
        assert self.model.rho == 2

    def test_drift_all_zero(self):
        states = [np.zeros(1)] * 6
        out = eval_drift(self.model, states, views_for(self.model))
        assert out == pytest.approx(0.0, abs=0)

    def test_drift_hand_value(self):
        # Y(t)=1, Y(t-0.25)=1, Y(t-2)=1, mean(t-0.25)=1, mean(t-0.5)=1
        states = [np.array([1.0]), np.zeros(1), np.array([1.0]),
                  np.zeros(1), np.zeros(1), np.array([1.0])]
        means = [np.zeros(1), np.zeros(1), np.array([1.0]),
                 np.zeros(1), np.array([1.0]), np.zeros(1)]
        out = eval_drift(self.model, states, views_for(self.model, means))
        assert out[0] == pytest.approx(-3.0, rel=1e-15)

    def test_diffusion_zero(self):
        out = eval_diffusion(self.model, [np.zeros(1)] * 6, views_for(self.model))
        assert out.shape == (1, 1)
        assert out[0, 0] == 0.0

    def test_diffusion_hand_value(self):
        # Y(t)=1, Y(t-0.2)=4, mean(t-0.4)=0.5 -> 1 + 0.25*4 + 0.5
        states = [np.array([1.0]), np.array([4.0]), np.zeros(1),
                  np.zeros(1), np.zeros(1), np.zeros(1)]
        means = [np.zeros(1)] * 3 + [np.array([0.5])] + [np.zeros(1)] * 2
        out = eval_diffusion(self.model, states, views_for(self.model, means))
        assert out[0, 0] == pytest.approx(2.5, rel=1e-15)

    def test_neutral(self):
        assert eval_neutral(self.model, np.zeros(1))[0] == 0.0
        assert eval_neutral(self.model, np.array([2.0]))[0] == pytest.approx(-8.0)

    def test_one_sided_drift_bound(self):
        # pointwise check of the dissipativity-type inequality with K = 30 and
        # modulus (1 + x5^4 + y5^4); measures are shared so their terms cancel
        rng = np.random.default_rng(2024)
        n = 10**5
        x = np.where(rng.random((n, 6, 1)) < 0.8,
                     rng.uniform(-3, 3, (n, 6, 1)),
                     rng.normal(0, 2, (n, 6, 1)))
        y = np.where(rng.random((n, 6, 1)) < 0.8,
                     rng.uniform(-3, 3, (n, 6, 1)),
                     rng.normal(0, 2, (n, 6, 1)))
        shared = views_for(self.model)
        ax = self.model.drift([x[:, i] for i in range(6)], shared)
        ay = self.model.drift([y[:, i] for i in range(6)], shared)
        dx = self.model.neutral(x[:, 5])
        dy = self.model.neutral(y[:, 5])
        lhs = ((x[:, 0] - dx - y[:, 0] + dy) * (ax - ay)).sum(axis=1)
        sq = ((x - y) ** 2).sum(axis=2)
        u2 = 1.0 + x[:, 5, 0] ** 4 + y[:, 5, 0] ** 4
        rhs = 30.0 * (sq[:, :5].sum(axis=1) + u2**2 * sq[:, 5])
        assert np.all(lhs <= rhs)


class TestExample2:
    def setup_method(self):
        self.model = builtin("example2")

    def test_lags(self):
        assert self.model.lags == (0, Fraction(1, 10), Fraction(2, 5), 1, 4)
        assert self.model.rho == 4
        assert self.model.dim_state == 2
        assert self.model.dim_noise == 1

    def test_diffusion_hand_value(self):
        # Y1(t)=1, Y2(t)=1, mean(t-0.1)=(0,0) -> column (2, 4)
        states = [np.array([1.0, 1.0])] + [np.zeros(2)] * 4
        out = eval_diffusion(self.model, states, views_for(self.model))
        assert out.shape == (2, 1)
        np.testing.assert_allclose(out[:, 0], [2.0, 4.0], rtol=1e-15)

    def test_neutral_hand_value(self):
        out = eval_neutral(self.model, np.array([math.pi / 2, 1.0]))
        np.testing.assert_allclose(out, [-2.0, -4.0], rtol=1e-12)

    def test_initial_path(self):
        path = self.model.initial_path(np.array([-4.0, 0.0]))
        np.testing.assert_allclose(path[1], [1.0, 1.0])
        np.testing.assert_allclose(path[0], [4.0 ** (2 / 3) + 1] * 2)


class TestLinear:
    def test_defaults(self):
        model = builtin("linear")
        assert model.lags == (0, Fraction(1, 2), 1)
        assert model.growth_meta.k_d == pytest.approx(0.3)
        states = [np.array([1.0]), np.array([2.0]), np.zeros(1)]
        means = [np.array([4.0]), np.zeros(1), np.array([2.0])]
        drift = eval_drift(model, states, views_for(model, means))
        assert drift[0] == pytest.approx(-1.0 * 1 + 0.5 * 2 + 0.5 * 2)
        diff = eval_diffusion(model, states, views_for(model, means))
        assert diff[0, 0] == pytest.approx(0.2 * 1 + 0.1 * 4)
        assert eval_neutral(model, np.array([2.0]))[0] == pytest.approx(0.6)
        path = model.initial_path(np.array([-1.0, 0.0]))
        np.testing.assert_array_equal(path, np.ones((2, 1)))

    def test_drift_single_term(self):
        model = builtin("linear", a=-1, b=0, c=0)
        states = [np.array([2.0]), np.zeros(1), np.zeros(1)]
        out = eval_drift(model, states, views_for(model))
        assert out[0] == pytest.approx(-2.0, rel=1e-15)

    def test_kappa_zero_neutral_vanishes(self):
        model = builtin("linear", kappa=0)
        assert eval_neutral(model, np.array([3.0]))[0] == 0.0
        assert model.growth_meta.k_d == 0.0

    def test_lag_overrides(self):
        model = builtin("linear", rho2="1/4", rho3="3/4")
        assert model.lags == (0, Fraction(1, 4), Fraction(3, 4))


def test_builtin_unknown_name():
    with pytest.raises(ConfigError):
        builtin("example3")


def test_builtin_rejects_stray_params():
    with pytest.raises(ConfigError):
        builtin("example1", kappa=0.5)
    with pytest.raises(ConfigError):
        builtin("linear", zeta=1.0)


def test_all_builtins_finite_on_random_inputs():
    rng = np.random.default_rng(7)
    for name in builtin_names():
        model = builtin(name)
        r, d = model.n_lags, model.dim_state
        for _ in range(50):
            states = [rng.uniform(-50, 50, (d,)) for _ in range(r)]
            means = [rng.uniform(-50, 50, (d,)) for _ in range(r)]
            vs = views_for(model, means)
            assert np.all(np.isfinite(eval_drift(model, states, vs)))
            assert np.all(np.isfinite(eval_diffusion(model, states, vs)))
            assert np.all(np.isfinite(eval_neutral(model, states[-1])))


def test_neutral_vanishes_at_origin_for_all_builtins():
    for name in builtin_names():
        model = builtin(name)
        assert np.all(eval_neutral(model, np.zeros(model.dim_state)) == 0.0)


def test_non_finite_output_raises():
    base = builtin("linear")
    bad = ModelSpec(
        name="bad",
        dim_state=1,
        dim_noise=1,
        lags=base.lags,
        neutral=base.neutral,
        drift=lambda s, v: np.full(s[0].shape, np.inf),
        diffusion=base.diffusion,
        initial_path=base.initial_path,
    )
    with pytest.raises(ModelEvaluationError) as exc:
        eval_drift(bad, [np.zeros(1)] * 3, views_for(bad))
    assert exc.value.model == "bad"


def test_non_finite_input_lag_reported():
    model = builtin("linear")
    states = [np.zeros(1), np.array([np.inf]), np.zeros(1)]
    with pytest.raises(ModelEvaluationError) as exc:
        eval_drift(model, states, views_for(model))
    assert exc.value.lag_index == 1
    assert "1/2" in str(exc.value)


def test_wrong_tuple_length():
    model = builtin("linear")
    with pytest.raises(ConfigError):
        eval_drift(model, [np.zeros(1)] * 2, views_for(model))


def test_degenerate_rho_rejected():
    base = builtin("linear")
    with pytest.raises(ConfigError):
        ModelSpec(
            name="norho", dim_state=1, dim_noise=1,
            lags=(Fraction(0), Fraction(0)),
            neutral=base.neutral, drift=base.drift, diffusion=base.diffusion,
            initial_path=base.initial_path,
        )


def test_neutral_must_vanish_at_origin():
    base = builtin("linear")
    with pytest.raises(ConfigError):
        ModelSpec(
            name="shifted", dim_state=1, dim_noise=1, lags=base.lags,
            neutral=lambda x: x + 1.0,
            drift=base.drift, diffusion=base.diffusion,
            initial_path=base.initial_path,
        )
