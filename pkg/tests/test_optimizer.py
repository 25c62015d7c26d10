import numpy as np
import pytest

from staged_pbr.estimation.optimizer import Adam, AdamSettings
from staged_pbr.utils.config import get_config
from staged_pbr.utils.exceptions import ParameterError


def test_first_step_is_learning_rate_times_sign():
    opt = Adam((3,), AdamSettings(learning_rate=0.1))
    delta = opt.step(np.zeros(3), np.array([2.0, -0.5, 0.0]))
    np.testing.assert_allclose(delta, [0.1, -0.1, 0.0], rtol=1e-5)


def test_zero_learning_rate_never_moves():
    opt = Adam((4,), AdamSettings(learning_rate=0.0))
    for _ in range(5):
        assert (opt.step(np.ones(4), np.array([1.0, -2.0, 3.0, 0.5])) == 0.0).all()


def test_elements_are_independent():
    a = Adam((2,), AdamSettings(learning_rate=0.05))
    b = Adam((1,), AdamSettings(learning_rate=0.05))
    grads = [np.array([0.3, 5.0]), np.array([-0.1, 2.0]), np.array([0.7, -1.0])]
    for g in grads:
        joint = a.step(np.zeros(2), g)
        alone = b.step(np.zeros(1), g[:1])
        assert joint[0] == alone[0]


def test_minimizes_a_quadratic():
    opt = Adam((2,), AdamSettings(learning_rate=0.1))
    x = np.array([3.0, -2.0])
    for _ in range(500):
        x = x - opt.step(x, 2.0 * x)
    assert np.abs(x).max() < 0.1


def test_weight_decay_shrinks_parameters():
    opt = Adam((1,), AdamSettings(learning_rate=0.1, weight_decay=0.5))
    delta = opt.step(np.array([2.0]), np.array([0.0]))
    assert delta[0] == pytest.approx(0.1 * 0.5 * 2.0)


@pytest.mark.parametrize(
    "kwargs",
    [{"learning_rate": -0.1}, {"beta1": 1.0}, {"beta2": -0.1}, {"epsilon": 0.0}, {"weight_decay": -1.0}],
)
def test_settings_validated(kwargs):
    with pytest.raises(ParameterError):
        AdamSettings(**kwargs)


def test_settings_from_config():
    settings = AdamSettings.from_config(get_config(), learning_rate=0.02)
    assert settings.learning_rate == 0.02
    assert 0.0 <= settings.beta1 < 1.0
