import math

import numpy as np
import pytest

import flipscale as fs


def test_version_and_spec():
    assert fs.__version__ == "0.1.0"
    spec = fs.FamilySpec("tribes", n=1024)
    assert spec.family == "tribes"
    assert spec.bit_count > 0
    assert "tribes" in repr(spec)


def test_flip_time_of_or_is_min_label():
    spec = fs.FamilySpec("or", n=4)
    assert fs.flip_time(spec, [0.9, 0.2, 0.7, 0.4]) == 0.2


def test_sample_is_deterministic_and_close_to_limit():
    spec = fs.FamilySpec("majority", n=1001)
    a = fs.sample_flip_times(spec, 4000, seed=5)
    b = fs.sample_flip_times(spec, 4000, seed=5, workers=2)
    assert isinstance(a, np.ndarray)
    np.testing.assert_array_equal(a, b)
    ks = fs.ks_distance(fs.rescaled_sample(spec, 4000, seed=5), spec)
    assert ks < 0.03


def test_limit_cdf_tribes():
    spec = fs.FamilySpec("tribes", n=65536)
    xs = [-1.0, 0.0, 1.0]
    expected = [1 - math.exp(-math.exp(x)) for x in xs]
    np.testing.assert_allclose(fs.limit_cdf(spec, xs), expected, rtol=1e-12)


def test_itermaj_analytics():
    assert fs.itermaj_gamma(3) == pytest.approx(1.5)
    assert 1 < fs.itermaj_beta(3) < 2
    values = fs.itermaj_limit(3, [-1.0, 0.0, 1.0])
    assert values[1] == 0.0
    assert values[0] == pytest.approx(-values[2])


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        fs.FamilySpec("majority", n=0)
    with pytest.raises(ValueError):
        fs.FamilySpec("no-such-family", n=3)
    with pytest.raises(fs.NoFlipError):
        fs.sample_flip_times(fs.FamilySpec("constant", n=4), 10)
    with pytest.raises(fs.UnsupportedError):
        fs.limit_cdf(fs.FamilySpec("circular-tribes", n=64), [0.0])
    with pytest.raises(ValueError):
        fs.build_plain([(0.0, 0.5), (1.0, 0.4)], 4096, 16)


def test_constructions():
    f = fs.build_plain([(-1.0, 0.5), (1.0, 0.5)], 4096, 16)
    s = f.sample(1000, seed=3)
    assert np.mean(s <= -2) == 0.0
    assert np.mean(s <= 2) == 1.0
    g = fs.build_transitive([(-1.0, 0.5), (1.0, 0.5)], 4096, 40, calibration_N=2000)
    assert len(g.thresholds) == 2
    assert len(g.thresholds[0]) == 24


def test_percolation():
    r = fs.percolation.window_scale(16, "theoretical")
    assert r > 0
    f = fs.percolation.crossing_probabilities(16, [-1.0, 0.0, 1.0], r, 2000, seed=2)
    assert f[0] <= f[1] <= f[2]
    mean, se = fs.percolation.pivotal_count(8, 200)
    assert mean > 0 and se >= 0
    lams = np.linspace(0.5, 2.0, 8)
    slope, _ = fs.percolation.tail_exponent_fit(lams, np.exp(-(lams ** (4 / 3))))
    assert slope == pytest.approx(4 / 3, abs=1e-6)
