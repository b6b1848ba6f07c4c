"""
Sweeping traffic density and zone design
========================================

Averages over seeds how the defense changes linkability as traffic grows.
It also compares the worked-example movement matrix with a zone where every
exit is equally likely.
"""

from mixzone import low_traffic_scenario, sweep, uniform_transition

SEEDS = 10

for name, transition in (("example matrix", None), ("uniform exits", uniform_transition(4))):
    kwargs = {} if transition is None else {"transition": transition}
    template = low_traffic_scenario(rate=0.02, duration=300.0, **kwargs)
    _, rows = sweep(template, "activation", ["off", "on"], SEEDS)
    print(name)
    for r in rows:
        if r["adversary"] == "ml":
            print(f"  defense {'on ' if r['value'] else 'off'}  "
                  f"accuracy {r['accuracy_mean']:.3f} +/- {r['accuracy_std']:.3f}  "
                  f"degree {r['degree_mean']:.3f}")

###############################################################################
# Heavier traffic without the defense: the crowd itself provides cover.
template = low_traffic_scenario(rate=0.02, duration=300.0, wmap_threshold=0.0)
_, rows = sweep(template, "arrival_rate", [0.01, 0.05, 0.2], SEEDS)
for r in rows:
    if r["adversary"] == "ml":
        print(f"rate {r['value']:.2f}/s  accuracy {r['accuracy_mean']:.3f}  "
              f"degree {r['degree_mean']:.3f}")
