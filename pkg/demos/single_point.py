"""
One placement, end to end
=========================

Build the one-zone topology, offload a single 4000 MIPS task from
cluster 1 and see where the optimiser puts it and what each tier costs.
"""

from cloudfogvec import Scenario, build_model, make_scenario, solve, verify

sc = Scenario(case="CFVA-L", demands=(4000,))
topo = sc.topology()
mask, tasks = make_scenario(sc, topology=topo)
print(f"{len(topo.processing_nodes())} processing nodes, {len(mask)} usable")

model = build_model(topo, tasks, mask)
print(f"model: {model.n_vars} variables, {len(model.constraints)} rows")

sol = solve(model)
print(f"\nstatus {sol.status}, {sol.objective:.3f} W in {sol.solve_time:.2f} s")
for (task, pn), mips in sorted(sol.allocation.items()):
    print(f"  task {task} -> {pn}: {mips:g} MIPS")

# where the watts go
for name, watts in sol.breakdown.as_dict().items():
    print(f"  {name:8s} {watts:9.3f}")

rep = verify(sol, model)
print("\nverified" if rep.ok() else "\n".join(rep.lines()))
