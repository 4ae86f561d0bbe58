"""Place five sensors one at a time.

Each new sensor is chosen by Bayesian optimization of the network EIG with
the earlier sensors held fixed. Takes a couple of minutes on one core.
"""

from netoed.bundle import default_bundle
from netoed.geo import MONITORING_BOX, sobol_events
from netoed.network import SensorNetwork
from netoed.optimize import greedy_place
from netoed.priors import PriorSpec, WeightedEventSet

bundle = default_bundle()
support = WeightedEventSet(sobol_events(512, MONITORING_BOX, 0, PriorSpec.uniform(MONITORING_BOX)))


def report(rec):
    print(f"sensor {rec.sensor_idx}: ({rec.lat:.3f}, {rec.lon:.3f})  EIG {rec.eig_total:.3f} nats")


net, trace = greedy_place(SensorNetwork(), 5, MONITORING_BOX, support, bundle, budget=30, seed=1,
                          n_realizations=8, callback=report)
print(f"\n{len(trace.evaluations)} evaluations")
