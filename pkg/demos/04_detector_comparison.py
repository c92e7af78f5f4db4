"""Compare the three detectors on the scenario suite.

The lagged-difference detector is the production method; edge-fit deviation
and the adaptive Gaussian mixture are the evaluated alternatives. All three
share the scoring and event machinery, so the comparison is apples to apples:
detection latency, temporal IoU against ground truth, and false events.

This is the same computation as `cablewatch bench`.
"""

from cablewatch.cli import main

main([
    "bench",
    "--scenarios", "S1,S3,S5",
    "--detectors", "diff,gmm,edgefit",
])
