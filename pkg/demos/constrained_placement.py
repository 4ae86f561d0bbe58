"""Sensors restricted to an L-shaped region.

Events are spread over the whole box but sensors may only go inside the
polygon. The optimizer tends to push stations onto the edges facing the
excluded corner.
"""

from netoed.bundle import default_bundle
from netoed.geo import MONITORING_BOX, GeoPoint, PolygonRegion, sobol_events
from netoed.network import SensorNetwork
from netoed.optimize import greedy_place
from netoed.priors import PriorSpec, WeightedEventSet

ring = [(40.0, -112.0), (42.0, -112.0), (42.0, -110.9), (40.9, -110.9), (40.9, -108.36), (40.0, -108.36)]
region = PolygonRegion([[GeoPoint(a, o) for a, o in ring]])

bundle = default_bundle()
support = WeightedEventSet(sobol_events(512, MONITORING_BOX, 0, PriorSpec.uniform(MONITORING_BOX)))
net, trace = greedy_place(SensorNetwork(), 5, region, support, bundle, budget=30, seed=1,
                          n_realizations=8, within=MONITORING_BOX)

dist = region.boundary_distance(net.lats, net.lons)
for s, d in zip(net, dist):
    print(f"({s.loc.lat:.3f}, {s.loc.lon:.3f})  {d:.3f} deg from the boundary")
