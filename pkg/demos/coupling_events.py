"""Frequencies of the coupling events along a short line.

Streams merged configurations from the gauge/Z coupling, records the event
indicators at the middle edge of the line and compares each frequency with
its bound.  At these couplings the events are rare, so zero counts are
the usual outcome; the cluster sizes show the merge is doing something.
"""
import numpy as np

from hlgt.cellcomplex import edge
from hlgt.clusters import dist1_to_boundary
from hlgt.couplings import LGTZ, coupling_stream, e4_bound, e6_bound, event_indicators
from hlgt.gibbs import Params
from hlgt.harness import straight_path

p = Params(2, 5, 0.7, 1.8)
gamma = straight_path((-2, 0, 0, 0), 0, 4)
mid = edge((0, 0, 0, 0), 0)
e = p.box.index(mid)
reach = dist1_to_boundary(mid, p.box)

recs = [event_indicators(s, gamma, e) for s in coupling_stream(p, LGTZ, 400, seed=11, thinning=4)]
freq = {k: np.mean([getattr(r, k) for r in recs]) for k in ("e3", "e4", "e5", "e6", "e7")}
print(f"{len(recs)} samples")
for k, v in freq.items():
    print(f"  P({k}) ~ {v:.4f}")
print(f"  mean cluster size {np.mean([r.cluster_size for r in recs]):.2f}, "
      f"mean E-set size {np.mean([r.eset_size for r in recs]):.2f}")
print(f"  bound on P(e4) {e4_bound(p.beta, p.kappa, reach):.4g}, on P(e6) {e6_bound(p.kappa):.4g}")
