# tests/test_kernel.py
import numpy as np
import pytest

from services.errors import BadParameters
from services.kernel import MAX_TENSOR_NODES, Kernel, tensor_indices


@pytest.mark.parametrize("profile", ["bump", "poly"])
def test_kernel_mass_is_one(profile):
    assert Kernel(profile).total_mass() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("order", [4, 12, 24, 48])
def test_radial_rule_is_a_probability_rule(order):
    nodes, weights = Kernel(n_radial=order).radial_rule()
    assert len(nodes) == order
    assert np.all((nodes > 0) & (nodes < 1))
    assert np.all(weights > 0)
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("profile", ["bump", "poly"])
def test_radial_rule_reproduces_second_moment(profile):
    k = Kernel(profile, n_radial=12)
    nodes, weights = k.radial_rule()
    assert np.dot(weights, nodes ** 2) == pytest.approx(k.second_moment(), abs=1e-9)


def test_disc_rule_moments():
    k = Kernel(n_radial=10, n_angular=16)
    nodes, weights = k.disc_rule()
    assert nodes.shape == weights.shape == (160,)
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert abs(np.dot(weights, nodes)) < 1e-14
    assert abs(np.dot(weights, nodes ** 3)) < 1e-14
    assert np.dot(weights, np.abs(nodes) ** 2) == pytest.approx(k.second_moment(), abs=1e-9)
    assert np.all(np.abs(nodes) < 1)


def test_log_moment_is_negative():
    assert -1.0 < Kernel().log_moment() < 0.0


def test_doubled_and_from_dict():
    k = Kernel.from_dict({"profile": "poly", "n_radial": 6, "n_angular": 10})
    assert k == Kernel("poly", 6, 10)
    assert k.doubled() == Kernel("poly", 12, 20)
    assert Kernel.from_dict(None) == Kernel()


@pytest.mark.parametrize("kwargs", [{"profile": "gauss"}, {"n_radial": 0}, {"n_angular": 0}])
def test_kernel_rejects_bad_parameters(kwargs):
    with pytest.raises(BadParameters):
        Kernel(**kwargs)


def test_tensor_indices_cover_the_grid_in_chunks():
    chunks = list(tensor_indices(3, 2, chunk=4))
    assert [len(c[0]) for c in chunks] == [4, 4, 1]
    pairs = {(int(i), int(j)) for c in chunks for i, j in zip(*c)}
    assert pairs == {(i, j) for i in range(3) for j in range(3)}


def test_for_dimension_keeps_small_rules():
    assert Kernel().for_dimension(1) is Kernel().for_dimension(1)
    assert Kernel().for_dimension(2) == Kernel()
    assert Kernel().doubled().for_dimension(2) == Kernel().doubled()


def test_for_dimension_shrinks_rules_in_three_variables(caplog):
    caplog.set_level("WARNING", logger="LelongLab")
    k = Kernel("poly", 24, 32).for_dimension(3)
    assert k == Kernel("poly", 12, 16)
    assert k.nodes_in(3) <= MAX_TENSOR_NODES
    assert "12×16" in caplog.text
