"""Better instruments, more information.

A fixed 3 x 3 grid is re-scored with every station's SNR shifted by the same
offset. Higher offsets mean quieter sites or better sensors.
"""

from netoed.bundle import default_bundle
from netoed.eig import eig_total
from netoed.geo import MONITORING_BOX, sobol_events
from netoed.network import grid_network
from netoed.priors import PriorSpec, WeightedEventSet

bundle = default_bundle()
support = WeightedEventSet(sobol_events(512, MONITORING_BOX, 0, PriorSpec.uniform(MONITORING_BOX)))

prev = None
for offset in (3.5, 1.73, 0.0, -0.64, -3.0):
    rep = eig_total(support, grid_network(MONITORING_BOX, 3, 3, offset), bundle, 8, seed=1)
    step = "" if prev is None else f"  (change {rep.total_eig - prev:+.3f})"
    print(f"offset {offset:+5.2f}: {rep.total_eig:.3f} +- {rep.total_std_error:.3f}{step}")
    prev = rep.total_eig
