import numpy as np
import pytest

from conftest import constant_bundle
from netoed.arrivals import PickNoiseModel, arrival_loglik_marginal
from netoed.detection import DetectionModel, detection_probability
from netoed.earthmodel import CorrelationModel
from netoed.network import SensorNetwork
from netoed.priors import Event
from netoed.synth import (
    SyntheticDataset,
    random_block,
    replicate_rngs,
    sample_arrivals,
    sample_detections,
    sample_mvn,
    synth_dataset,
    write_datasets_csv,
)

NET3 = SensorNetwork.from_arrays([40.5, 41.0, 41.6], [-111.2, -109.5, -110.4])
EVENT = Event(41.0, -110.2, 10.0, 2.5)


def test_forced_detections():
    rng = np.random.default_rng(0)
    assert sample_detections(EVENT, NET3, DetectionModel(0, 0, 0, 50.0), rng).all()
    assert not sample_detections(EVENT, NET3, DetectionModel(0, 0, 0, -800.0), rng).any()


def test_detection_rate_binomial():
    rng = np.random.default_rng(1)
    dm = DetectionModel()
    e = Event(41.0, -110.2, 10.0, 1.5)
    p = detection_probability(dm, e, NET3)
    n = 10_000
    rate = np.mean([sample_detections(e, NET3, dm, rng) for _ in range(n)], axis=0)
    assert np.all(np.abs(rate - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_nugget_only_limit():
    bundle = constant_bundle(sigma_model=0.0, pick_noise=PickNoiseModel(1e-6, 0.5, 1.0, 10.0))
    rng = np.random.default_rng(2)
    mu = bundle.station_terms(EVENT, NET3).mu[0]
    for _ in range(50):
        a = sample_arrivals(EVENT, np.ones(3, bool), NET3, bundle, rng)
        assert np.all(np.abs(a - mu) < 3e-3 * 3)


def test_empirical_covariance():
    bundle = constant_bundle(sigma_model=0.9, correlation=CorrelationModel(147.5))
    d = np.ones(3, bool)
    terms = bundle.station_terms(EVENT, NET3)
    cov = terms.covariance(bundle.nugget)[0]
    rng = np.random.default_rng(3)
    draws = np.array([sample_arrivals(EVENT, d, NET3, bundle, rng) for _ in range(10_000)])
    emp = np.cov(draws.T)
    assert np.allclose(draws.mean(axis=0), terms.mu[0], atol=4 * np.sqrt(np.diag(cov) / 1e4).max())
    assert np.all(np.abs(emp - cov) <= 0.05 * np.abs(cov))


def test_perfectly_correlated_identical_residuals():
    cov = np.full((2, 2), 0.49)
    z = np.random.default_rng(4).standard_normal((1000, 2))
    x = sample_mvn(cov, z)
    assert np.max(np.abs(x[:, 0] - x[:, 1])) < 1e-9
    assert np.std(x[:, 0]) == pytest.approx(0.7, rel=0.1)


def test_sample_arrivals_empty():
    bundle = constant_bundle()
    assert sample_arrivals(EVENT, np.zeros(3, bool), NET3, bundle, np.random.default_rng(0)).size == 0


def test_synth_deterministic(bundle):
    a = synth_dataset(EVENT, NET3, bundle, 32, seed=7)
    b = synth_dataset(EVENT, NET3, bundle, 32, seed=7)
    assert len(a) == 32
    for x, y in zip(a, b):
        assert np.array_equal(x.detections, y.detections)
        assert x.arrivals.tobytes() == y.arrivals.tobytes()


def test_replicate_streams_distinct():
    draws = []
    for r in range(32):
        det, arr = replicate_rngs(5, 0, r)
        draws.append((det.random(), arr.random()))
    flat = [v for pair in draws for v in pair]
    assert len(set(flat)) == len(flat)


def test_replicate_is_pure_function_of_index(bundle):
    long = synth_dataset(EVENT, NET3, bundle, 10, seed=3)
    short = synth_dataset(EVENT, NET3, bundle, 4, seed=3)
    for x, y in zip(short, long):
        assert np.array_equal(x.detections, y.detections) and np.array_equal(x.arrivals, y.arrivals)


def test_random_block_prefix_and_order():
    u5, z5 = random_block(9, [0, 1, 2], 4, 5)
    u3, z3 = random_block(9, [0, 1, 2], 4, 3)
    assert np.array_equal(u5[..., :3], u3) and np.array_equal(z5[..., :3], z3)
    ur, zr = random_block(9, [2, 0, 1], 4, 5)
    assert np.array_equal(ur[[1, 2, 0]], u5) and np.array_equal(zr[[1, 2, 0]], z5)


def test_dataset_invariant():
    with pytest.raises(ValueError):
        SyntheticDataset(np.array([True, False]), np.zeros(2))


def test_roundtrip_likelihood_prefers_truth(bundle):
    net = SensorNetwork.from_arrays([40.3, 40.6, 41.2, 41.7, 41.0], [-111.6, -109.0, -111.0, -109.6, -110.3])
    truth = Event(41.0, -110.2, 10.0, 3.0)
    moved = Event(41.0, -109.2, 10.0, 3.0)
    data = synth_dataset(truth, net, bundle, 500, seed=11)
    used = [ds for ds in data if ds.detections.sum() >= 2]
    assert len(used) > 100
    ll_true = np.mean([arrival_loglik_marginal(ds.arrivals, truth, ds.detections, net, bundle) for ds in used])
    ll_moved = np.mean([arrival_loglik_marginal(ds.arrivals, moved, ds.detections, net, bundle) for ds in used])
    assert ll_true > ll_moved


def test_csv_rows(tmp_path, bundle):
    data = synth_dataset(EVENT, NET3, bundle, 4, seed=1)
    path = tmp_path / "d.csv"
    write_datasets_csv(path, data, "test header")
    lines = path.read_text().splitlines()
    assert lines[0] == "# test header"
    assert lines[1] == "replicate,station_idx,detected,arrival_s"
    assert len(lines) == 2 + 4 * 3
    for line in lines[2:]:
        r, i, det, arr = line.split(",")
        assert (det == "1") == (arr != "")
