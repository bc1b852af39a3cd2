"""
One request, one optimal placement
==================================

A five-router chain with the content provider hanging off the far end.
We serve a single request and look at what the placement optimizer does
with the copies along the delivery path.
"""

import numpy as np

from coopcache import (Catalog, CooperationPolicy, Instance, Placement, Topology,
                       brute_force_oracle)

# routers 0-1-2-3-4, CP attached to router 4; clients sit at router 0
g = Topology(n_routers=5, edges=((0, 1), (1, 2), (2, 3), (3, 4)),
             edge_routers=(0,), client_nodes=(0,), cp_attach=4)

p = np.array([0.5, 0.3, 0.2])
start = Placement.from_caches(3, [[], [], [1], [], [2]])

inst = Instance(topology=g, capacities=(1, 1, 1, 1, 1), policy=CooperationPolicy(1, 2),
                catalog=Catalog(np.ones(3, dtype=int)), popularity=p,
                placement=start, request=(0, 0))

###############################################################################
# The request for item 0 misses everywhere and travels to the CP. With K = 1
# only one copy of item 0 may exist, so the solver picks the router where it
# pays off most.

decision = inst.solve()
print("admit:", decision.admissions)
print("evict:", decision.evictions)
print("objective:", decision.objective_value, decision.solver_status)

###############################################################################
# The brute-force enumeration agrees.

oracle = brute_force_oracle(inst)
print("oracle objective:", oracle.objective, "states scanned:", oracle.states)
