import inspect
import math

import numpy as np
import pytest

from conftest import constant_bundle
from netoed._errors import InfeasibleRegionError, InputError
from netoed.detection import DetectionModel
from netoed.eig import eig_total
from netoed.geo import Domain, GeoPoint, PolygonRegion, point_in_polygon
from netoed.network import SensorNetwork
from netoed.optimize import (
    expected_improvement,
    feasible_candidates,
    gp_fit,
    gp_predict,
    greedy_place,
    propose_next,
)
from netoed.priors import Event, WeightedEventSet

BOX = (40.0, 42.0, -112.0, -108.36)


def _peak(p, centre=(41.3, -109.7), width=0.3):
    p = np.atleast_2d(p)
    return np.exp(-0.5 * ((p[:, 0] - centre[0]) ** 2 + (p[:, 1] - centre[1]) ** 2) / width**2)


def _dense_oracle(gp, x):
    # textbook GP posterior with explicit inverses, in original units
    def k(a, b):
        ua, ub = gp.unit(a), gp.unit(b)
        d = (ua[:, None, :] - ub[None, :, :]) / gp.length_scales
        return gp.signal_var * np.exp(-0.5 * np.sum(d**2, axis=-1))

    X = gp.train_points
    y = (gp.train_values - gp.y_mean) / gp.y_scale
    Kinv = np.linalg.inv(k(X, X) + (gp.noise_var + 1e-10) * np.eye(len(X)))
    ks = k(x, X)
    mean = gp.y_mean + gp.y_scale * ks @ Kinv @ y
    var = gp.signal_var - np.einsum("ij,jk,ik->i", ks, Kinv, ks)
    return mean, gp.y_scale * np.sqrt(np.clip(var, 0, None))


def test_constant_values():
    rng = np.random.default_rng(0)
    pts = rng.uniform([40, -112], [42, -108.36], (12, 2))
    gp = gp_fit(pts, np.full(12, 2.5), bounds=BOX)
    m, _ = gp_predict(gp, rng.uniform([40, -112], [42, -108.36], (30, 2)))
    assert np.allclose(m, 2.5, atol=1e-12)


def test_interpolates_training_points():
    rng = np.random.default_rng(1)
    pts = rng.uniform([40, -112], [42, -108.36], (25, 2))
    vals = _peak(pts)
    gp = gp_fit(pts, vals, bounds=BOX)
    assert gp.noise_var < 1e-6
    m, sd = gp_predict(gp, pts)
    assert np.max(np.abs(m - vals)) < 1e-6
    assert np.all(sd <= gp.y_scale * math.sqrt(gp.noise_var) + 1e-6)


def test_length_scale_recovery():
    rng = np.random.default_rng(2)
    P = rng.uniform(0, 2, (50, 2))
    d2 = np.sum((P[:, None] - P[None]) ** 2, axis=-1)
    y = np.linalg.cholesky(np.exp(-0.5 * d2 / 0.3**2) + 1e-8 * np.eye(50)) @ rng.standard_normal(50)
    gp = gp_fit(P, y, bounds=(0, 2, 0, 2))
    assert np.all(gp.length_scales_deg > 0.15) and np.all(gp.length_scales_deg < 0.6)


def test_predict_matches_dense_oracle():
    rng = np.random.default_rng(3)
    for trial in range(5):
        pts = rng.uniform([40, -112], [42, -108.36], (15, 2))
        vals = rng.normal(size=15) + _peak(pts)
        gp = gp_fit(pts, vals, bounds=BOX, seed=trial)
        x = rng.uniform([40, -112], [42, -108.36], (40, 2))
        m, sd = gp_predict(gp, x)
        mo, sdo = _dense_oracle(gp, x)
        assert np.allclose(m, mo, atol=1e-8)
        assert np.allclose(sd, sdo, atol=1e-8)


def test_far_field_reverts_to_prior():
    rng = np.random.default_rng(4)
    pts = rng.uniform([40, -112], [42, -108.36], (10, 2))
    vals = _peak(pts)
    gp = gp_fit(pts, vals, bounds=BOX)
    m, sd = gp_predict(gp, np.array([80.0, 60.0]))
    assert m == pytest.approx(gp.y_mean, abs=1e-9)
    assert sd == pytest.approx(gp.y_scale * math.sqrt(gp.signal_var), rel=1e-9)


def test_duplicate_conflicting_points():
    pts = np.array([[41.0, -110.0], [41.0, -110.0], [40.5, -109.0]])
    gp = gp_fit(pts, [1.0, 2.0, 0.0], bounds=BOX)
    m, _ = gp_predict(gp, np.array([41.0, -110.0]))
    assert np.isfinite(m)


def test_gp_needs_two_points():
    with pytest.raises(InputError):
        gp_fit([[41.0, -110.0]], [1.0])


def test_ei_values():
    assert expected_improvement(0.5, 0.0, 1.0) == 0.0
    assert expected_improvement(1.5, 0.0, 1.0) == pytest.approx(0.5)
    assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(0.39894, abs=1e-5)
    rng = np.random.default_rng(5)
    m, s, b = rng.normal(size=1000), rng.uniform(0, 2, 1000), rng.normal(size=1000)
    s[::7] = 0.0
    assert np.all(expected_improvement(m, s, b) >= np.maximum(m - b, 0) - 1e-15)


def _random_polygon(rng):
    k = int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    rad = rng.uniform(0.05, 0.8, k)
    c = rng.uniform([40.5, -111.5], [41.5, -109.0])
    return PolygonRegion([[GeoPoint(c[0] + r * math.sin(a), c[1] + r * math.cos(a)) for a, r in zip(ang, rad)]])


def test_propose_stays_in_random_polygons():
    rng = np.random.default_rng(6)
    pts = rng.uniform([40, -112], [42, -108.36], (12, 2))
    gp = gp_fit(pts, _peak(pts), bounds=BOX)
    for _ in range(1000):
        region = _random_polygon(rng)
        try:
            lat, lon = propose_next(gp, region, rng, n_candidates=256)
        except InfeasibleRegionError:
            continue
        assert point_in_polygon(GeoPoint(lat, lon), region)


def test_infeasible_region():
    # a polygon entirely outside the sensor domain
    region = PolygonRegion([[GeoPoint(45.0, -100.0), GeoPoint(45.0, -99.0), GeoPoint(46.0, -99.5)]])
    domain = Domain(*BOX, 0, 40, 0.5, 4.0)
    assert feasible_candidates(region, 64, 0).shape[0] > 0
    assert feasible_candidates(region, 64, 0, within=domain).shape[0] == 0
    gp = gp_fit([[41.0, -110.0], [41.5, -109.0]], [0.0, 1.0], bounds=BOX)
    with pytest.raises(InfeasibleRegionError):
        propose_next(gp, region, np.random.default_rng(0), within=domain)
    ws, bundle = _toy()
    with pytest.raises(InfeasibleRegionError):
        greedy_place(SensorNetwork(), 1, region, ws, bundle, budget=10, within=domain)


def test_locates_single_peak():
    region = Domain(*BOX, 0, 40, 0.5, 4.0)
    rng = np.random.default_rng(7)
    pts = [tuple(p) for p in feasible_candidates(region, 10, 8)]
    vals = list(_peak(np.array(pts)))
    for it in range(30):
        gp = gp_fit(pts, vals, bounds=BOX, seed=it)
        p = propose_next(gp, region, rng)
        pts.append(p)
        vals.append(float(_peak(np.array(p))[0]))
    best = np.array(pts[int(np.argmax(vals))])
    assert np.hypot(*(best - [41.3, -109.7])) < 0.05


def test_fallback_to_max_std():
    rng_pts = np.random.default_rng(9)
    pts = rng_pts.uniform([40, -112], [42, -108.36], (8, 2))
    gp = gp_fit(pts, _peak(pts), bounds=BOX)
    # an unreachable incumbent makes EI vanish everywhere
    gp.train_values = np.append(gp.train_values[:-1], 1e6)
    region = Domain(*BOX, 0, 40, 0.5, 4.0)
    got = propose_next(gp, region, np.random.default_rng(10))
    cand = feasible_candidates(region, 2048, int(np.random.default_rng(10).integers(2**31)))
    _, sd = gp_predict(gp, cand)
    assert got == tuple(cand[int(np.argmax(sd))])


TOY_REGION = Domain(40.3, 41.7, -110.7, -109.3, 0, 40, 0, 5)


def _toy():
    # three events on a meridian; detection falls off sharply with distance
    bundle = constant_bundle(detection=DetectionModel(alpha=-8.0, beta=0.0, gamma_m=0.0, delta0=3.0))
    events = [Event(40.6, -110, 10, 2), Event(41.0, -110, 10, 2), Event(41.4, -110, 10, 2)]
    return WeightedEventSet(events, np.log([0.25, 0.25, 0.5])), bundle


def test_greedy_matches_grid_optimum():
    ws, bundle = _toy()
    lats = np.linspace(40.3, 41.7, 29)
    lons = np.linspace(-110.7, -109.3, 29)

    def f(lat, lon):
        return eig_total(ws, SensorNetwork().add(lat, lon), bundle, 64, 0, use_arrivals=False, threads=1).total_eig

    grid = np.array([[f(a, o) for o in lons] for a in lats])
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    net, trace = greedy_place(SensorNetwork(), 1, TOY_REGION, ws, bundle, budget=30, seed=0,
                              n_realizations=64, use_arrivals=False, threads=1)
    rec = trace.records[0]
    assert math.hypot(rec.lat - lats[i], rec.lon - lons[j]) < 0.1
    assert rec.eig_total >= grid.max() - 0.01


def test_greedy_trace_and_region():
    ws, bundle = _toy()
    region = PolygonRegion([[GeoPoint(40.4, -110.6), GeoPoint(41.6, -110.6), GeoPoint(41.0, -109.4)]])
    net, trace = greedy_place(SensorNetwork(), 3, region, ws, bundle, budget=12, seed=1,
                              n_realizations=16, use_arrivals=False, threads=1)
    assert len(trace) == 3 and len(net) == 3
    assert all(point_in_polygon(GeoPoint(s.loc.lat, s.loc.lon), region) for s in net)
    assert len(trace.evaluations) == 36
    for rec in trace.records:
        evals = [e for e in trace.evaluations if e[0] == rec.sensor_idx]
        assert rec.eig_total == max(e[4] for e in evals)


def test_greedy_reproducible():
    ws, bundle = _toy()
    runs = [greedy_place(SensorNetwork(), 1, TOY_REGION, ws, bundle, budget=12, seed=2,
                         n_realizations=8, use_arrivals=False, threads=t)[1].evaluations for t in (1, 3)]
    assert runs[0] == runs[1]


def test_greedy_zero_sensors_and_validation():
    ws, bundle = _toy()
    net0 = SensorNetwork.from_arrays([41.0], [-110.0])
    net, trace = greedy_place(net0, 0, TOY_REGION, ws, bundle)
    assert net == net0 and len(trace) == 0
    with pytest.raises(InputError):
        greedy_place(net0, 1, TOY_REGION, ws, bundle, budget=5)


def test_default_budget_is_100():
    assert inspect.signature(greedy_place).parameters["budget"].default == 100


def test_trace_csv(tmp_path):
    ws, bundle = _toy()
    _, trace = greedy_place(SensorNetwork(), 1, TOY_REGION, ws, bundle, budget=10, seed=3,
                            n_realizations=4, use_arrivals=False, threads=1)
    path = tmp_path / "trace.csv"
    trace.write_csv(path, "hdr")
    lines = path.read_text().splitlines()
    assert lines[1] == "sensor_idx,iter,lat,lon,eig_nats"
    assert len(lines) == 12
