import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from netoed._errors import DimensionError, SeparableDataError
from netoed.detection import (
    CatalogRow,
    DetectionModel,
    _design,
    classification_metrics,
    detection_loglik,
    detection_probability,
    fit_detection_model,
    read_catalog,
    synthetic_catalog,
    weighted_bce,
    write_catalog,
)
from netoed.geo import KM_PER_DEGREE, GeoPoint
from netoed.network import SensorNetwork
from netoed.priors import Event

DEFAULT = DetectionModel()


def _station_at_distance(deg):
    # along the equator the central angle equals the longitude difference
    return GeoPoint(0.0, deg)


def test_default_coefficients_examples():
    e = Event(0.0, 0.0, 0.0, 2.0)
    assert float(DEFAULT.logit(0, 0, 2)) == pytest.approx(4.23)
    assert detection_probability(DEFAULT, e, _station_at_distance(0.0)) == pytest.approx(0.98566, abs=1e-5)
    assert detection_probability(DEFAULT, e, _station_at_distance(3.0)) == pytest.approx(0.01434, abs=1e-5)


def test_zero_model_is_half():
    m = DetectionModel(0, 0, 0, 0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        e = Event(rng.uniform(40, 42), rng.uniform(-112, -108), rng.uniform(0, 40), rng.uniform(0.5, 4))
        assert detection_probability(m, e, GeoPoint(41, -110)) == 0.5


def test_loglik_half_probability():
    m = DetectionModel(0, 0, 0, 0)
    net = SensorNetwork.from_arrays([40.5, 41, 41.5, 41.2], [-111, -110, -109, -108.5])
    e = Event(41, -110, 5, 1.0)
    assert detection_loglik(m, [1, 0, 1, 1], e, net) == pytest.approx(4 * math.log(0.5))


def test_loglik_single_station():
    net = SensorNetwork.from_arrays([0.0], [0.0])
    ll = detection_loglik(DEFAULT, [True], Event(0, 0, 0, 2), net)
    assert ll == pytest.approx(math.log(0.98566), abs=1e-5)


@pytest.mark.parametrize("k", [1, 4, 10])
def test_loglik_enumeration_sums_to_one(k):
    rng = np.random.default_rng(k)
    net = SensorNetwork.from_arrays(rng.uniform(40, 42, k), rng.uniform(-112, -108.4, k))
    e = Event(41, -110, 8, 1.5)
    total = sum(math.exp(detection_loglik(DEFAULT, d, e, net)) for d in itertools.product([0, 1], repeat=k))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_loglik_dimension_error():
    net = SensorNetwork.from_arrays([41.0, 41.5], [-110, -109])
    with pytest.raises(DimensionError):
        detection_loglik(DEFAULT, [1, 0, 1], Event(41, -110, 5, 1), net)


def test_loglik_permutation_invariant():
    rng = np.random.default_rng(3)
    net = SensorNetwork.from_arrays(rng.uniform(40, 42, 7), rng.uniform(-112, -108.4, 7))
    d = rng.uniform(size=7) < 0.5
    e = Event(40.7, -109.5, 12, 2.2)
    perm = rng.permutation(7)
    a = detection_loglik(DEFAULT, d, e, net)
    b = detection_loglik(DEFAULT, d[perm], e, net.permuted(perm))
    assert a == pytest.approx(b, abs=1e-12)


def test_monotone_distance_and_magnitude():
    rng = np.random.default_rng(4)
    for _ in range(100):
        dist, depth, mag = rng.uniform(0, 4), rng.uniform(0, 40), rng.uniform(0.5, 4)
        p = lambda a, b, c: expit(DEFAULT.logit(a, b, c))
        assert p(dist + 1e-4, depth, mag) < p(dist, depth, mag)
        assert p(dist, depth, mag + 1e-4) > p(dist, depth, mag)


def test_probability_uses_degrees():
    e = Event(41.0, -110.0, 0.0, 2.0)
    net = SensorNetwork.from_arrays([41.0], [-109.0])
    dist_km = 111.19 * math.degrees(math.acos(math.sin(math.radians(41)) ** 2
                                              + math.cos(math.radians(41)) ** 2 * math.cos(math.radians(1))))
    want = expit(DEFAULT.logit(dist_km / KM_PER_DEGREE, 0.0, 2.0))
    assert detection_probability(DEFAULT, e, net)[0] == pytest.approx(want, rel=1e-10)


def test_bce_gradient_finite_difference():
    rows = synthetic_catalog(300, DEFAULT, seed=5, missing_rate=0.1)
    X, y = _design(rows)
    rng = np.random.default_rng(6)
    for _ in range(20):
        w = rng.normal(size=5)
        _, g = weighted_bce(w, X, y, 2.0)
        fd = np.empty(5)
        for j in range(5):
            h = 1e-6 * max(1.0, abs(w[j]))
            wp, wm = w.copy(), w.copy()
            wp[j] += h
            wm[j] -= h
            fd[j] = (weighted_bce(wp, X, y, 2.0)[0] - weighted_bce(wm, X, y, 2.0)[0]) / (2 * h)
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * np.abs(g).max())


def test_refit_recovers_coefficients():
    rows = synthetic_catalog(50_000, DEFAULT, seed=7)
    m, info = fit_detection_model(rows, detection_weight=1.0, return_info=True)
    assert info["converged"]
    assert np.allclose(m.coefficients, DEFAULT.coefficients, atol=0.1)


def test_refit_with_missing_magnitudes():
    rows = synthetic_catalog(20_000, DEFAULT, seed=8, missing_rate=0.2)
    m = fit_detection_model(rows, detection_weight=1.0)
    assert np.allclose(m.coefficients, DEFAULT.coefficients, atol=0.15)


def test_weight_two_raises_recall():
    train = synthetic_catalog(20_000, DEFAULT, seed=9)
    test = synthetic_catalog(20_000, DEFAULT, seed=10)
    assert abs(np.mean([r.detected for r in train]) - 0.23) < 0.03
    r1 = classification_metrics(fit_detection_model(train, 1.0), test)["recall"]
    r2 = classification_metrics(fit_detection_model(train, 2.0), test)["recall"]
    assert r2 > r1


def test_separable_errors():
    rows = [CatalogRow(1.0, 5.0, 2.0, 0, True)] * 10
    with pytest.raises(SeparableDataError):
        fit_detection_model(rows)
    sep = [CatalogRow(d, 5.0, 2.0, 0, d < 1.0) for d in np.linspace(0, 2, 40)]
    with pytest.raises(SeparableDataError) as info:
        fit_detection_model(sep)
    assert info.value.coefficients is not None


def test_catalog_roundtrip(tmp_path):
    rows = synthetic_catalog(50, DEFAULT, seed=11, missing_rate=0.3)
    path = tmp_path / "catalog.csv"
    write_catalog(path, rows)
    assert read_catalog(path) == rows
    assert "dist_deg,depth_km,mag,mag_missing,detected" in path.read_text().splitlines()[0]


def test_catalog_row_validation():
    with pytest.raises(ValueError):
        CatalogRow(-1.0, 5.0, 2.0, 0, True)
    with pytest.raises(ValueError):
        CatalogRow(1.0, 5.0, None, 0, True)
