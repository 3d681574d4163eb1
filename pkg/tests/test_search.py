# tests/test_search.py
import numpy as np
import pytest

from services.errors import BadParameters
from services.search import SearchConfig, polar_search


def test_finds_interior_minimum_in_one_variable():
    target = 0.3 + 0.2j
    res = polar_search(lambda W: np.abs(W[:, 0] - target) ** 2, [0.0], 1.0, SearchConfig())
    assert res.value < 1e-6
    assert abs(res.point[0] - target) < 1e-3
    assert res.evaluations > 0


def test_finds_separable_minimum_in_two_variables():
    target = np.array([0.5 - 0.1j, -0.2 + 0.4j])
    res = polar_search(lambda W: np.sum(np.abs(W - target) ** 2, axis=1), [0.0, 0.0], 1.0, SearchConfig())
    assert res.value < 1e-6


def test_maximize_reports_the_maximum():
    target = 1.0 + 0.5j
    res = polar_search(lambda W: 2.0 - np.abs(W[:, 0] - target) ** 2, [1.0], 0.8, SearchConfig(), maximize=True)
    assert res.value == pytest.approx(2.0, abs=1e-6)


def test_anchor_is_always_considered():
    anchor = 0.123 + 0.456j

    def spike(W):
        return np.where(W[:, 0] == anchor, -1.0, 0.0)

    res = polar_search(spike, [0.0], 1.0, SearchConfig(coarse_grid=5), anchors=[[anchor]])
    assert res.value == -1.0


def test_nan_values_are_never_chosen():
    res = polar_search(lambda W: np.where(np.abs(W[:, 0]) > 0.5, np.nan, np.abs(W[:, 0])), [0.0], 1.0,
                       SearchConfig(coarse_grid=5))
    assert np.isfinite(res.value)


@pytest.mark.parametrize("radius", [0.0, -1.0, np.inf])
def test_rejects_bad_radius(radius):
    with pytest.raises(BadParameters):
        polar_search(lambda W: np.zeros(len(W)), [0.0], radius, SearchConfig())


@pytest.mark.parametrize("kwargs", [{"coarse_grid": 2}, {"refine_iters": -1}, {"multistart": 0},
                                    {"radius_override": 0.0}])
def test_search_config_validation(kwargs):
    with pytest.raises(BadParameters):
        SearchConfig(**kwargs)


def test_search_config_from_dict():
    cfg = SearchConfig.from_dict({"coarse_grid": 5, "radius_override": "2"})
    assert cfg == SearchConfig(coarse_grid=5, radius_override=2.0)
    assert SearchConfig.from_dict(None) == SearchConfig()


def test_finds_a_narrow_dip_between_ladder_rungs():
    # mọi điểm lưới thô ngoài tâm đều tệ hơn tâm; chỉ có quét theo bán kính mới thấy hõm quanh |w| = 1e-2
    def ring(W):
        r = np.abs(W[:, 0])
        with np.errstate(divide="ignore"):
            dip = 0.05 * np.exp(-((np.log(r) - np.log(1e-2)) / 0.3) ** 2)
        return 0.1 + r - dip

    res = polar_search(ring, [0.0], 1.0, SearchConfig())
    assert res.value < 0.065
    assert 5e-3 < abs(res.point[0]) < 2e-2


def test_anchor_at_the_center_still_reaches_the_dip():
    def ring(W):
        r = np.abs(W[:, 0] - 2.0)
        with np.errstate(divide="ignore"):
            dip = 0.05 * np.exp(-((np.log(r) - np.log(1e-2)) / 0.3) ** 2)
        return 0.1 + r - dip

    res = polar_search(ring, [2.0], 1.0, SearchConfig(multistart=1), anchors=[[2.0]])
    assert res.value < 0.065
