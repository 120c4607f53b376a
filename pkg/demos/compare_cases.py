"""
Cloud only vs fog vs vehicles
=============================

Sweep demand for the four availability cases and print the savings of
each case against cloud-only placement.
"""

from cloudfogvec import Scenario, run_grid, savings
from cloudfogvec.harness import check_invariants

base = Scenario(pattern="one-task-one-cluster", demands=(1000, 4000, 7000, 10000))
combos = [("CCA", "SA"), ("CFA", "SA"), ("CFVA-L", "SA"), ("CFVA-H", "SA")]
records = run_grid(base, combos)

by_key = {(r.case, r.demand): r for r in records}
print(f"{'MIPS':>6} " + " ".join(f"{c:>9}" for c, _ in combos))
for w in base.demands:
    print(f"{w:6.0f} " + " ".join(f"{by_key[c, w].total:9.2f}" for c, _ in combos))

print("\nsaving vs cloud only (%)")
for w in base.demands:
    cloud = by_key["CCA", w]
    row = [savings(cloud, by_key[c, w]) for c, _ in combos[1:]]
    print(f"{w:6.0f} " + " ".join(f"{s:9.1f}" for s in row))

problems = check_invariants(records)
print("\ninvariants hold" if not problems else "\n".join(problems))
