"""
Mapping weights for a four-gate zone
====================================

Computes W_MAP for the worked-example state and movement matrix, then shows
which lanes get virtual transceivers at a threshold of 0.1.
"""

import numpy as np

from mixzone import EXAMPLE_STATE, EXAMPLE_TRANSITION, compute_wmap, make_zone, plan_activation

np.set_printoptions(precision=5, suppress=True)

zone = make_zone(EXAMPLE_TRANSITION, wmap_threshold=0.1)
state = EXAMPLE_STATE
print("ingress per gate:", state.ingress)
print("egress per gate: ", state.egress)

###############################################################################
# Raw weights are ingress_i ** egress_j * p[i, j]; each row is then normalized.
wm = compute_wmap(state, zone.transition)
print(wm.raw)
print(wm.normalized)

# Entry (1,4) comes out at 0.0117, which is what makes row 1 sum to one.
print("row sums:", wm.normalized.sum(axis=1))

###############################################################################
# Lanes touched by a pair below the threshold are padded up to 10 vehicles.
plan = plan_activation(wm, state, zone)
print("below-threshold pairs:", sorted(plan.triggers))
print("transceivers:", plan.as_dict())
