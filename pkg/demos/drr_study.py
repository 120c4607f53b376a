"""
How traffic changes the picture
===============================

Raise the data rate ratio and watch work drift from the vehicles and
edge fog back toward tiers behind fatter links.
"""

from cloudfogvec import Scenario, run_sweep

for drr in (0.001, 0.02, 0.08, 0.4):
    sc = Scenario(case="CFVA-L", demands=(2000, 6000), drr=drr)
    for r in run_sweep(sc):
        if not r.ok:
            print(f"drr {drr:<6} {r.demand:6.0f} MIPS  {r.status}")
            continue
        tiers = ", ".join(f"{k} {v:g}" for k, v in r.tier_alloc.items() if v > 0)
        print(f"drr {drr:<6} {r.demand:6.0f} MIPS  {r.total:8.2f} W  net {r.components['tpc_net']:6.2f} W  [{tiers}]")
