"""Recovering the detection model from a synthetic catalog.

A catalog is drawn from known logistic coefficients and refitted. Weighting
detections twice as heavily trades precision for recall.
"""

from netoed.detection import DetectionModel, classification_metrics, fit_detection_model, synthetic_catalog

truth = DetectionModel()
train = synthetic_catalog(50_000, truth, seed=1)
held_out = synthetic_catalog(20_000, truth, seed=2)

print("truth   ", " ".join(f"{c:+.3f}" for c in truth.coefficients))
for w in (1.0, 2.0):
    fit = fit_detection_model(train, detection_weight=w)
    m = classification_metrics(fit, held_out)
    print(f"weight {w:.0f}", " ".join(f"{c:+.3f}" for c in fit.coefficients),
          f" precision {m['precision']:.3f} recall {m['recall']:.3f}")
