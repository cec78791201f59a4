"""
Exhaustive check of the switching protocol
==========================================

The abstract model lets any enabled transition fire next, so these verdicts
hold whatever the real delays are.  Each seeded fault must be caught.
"""

from aerlink.checker import (MUTATIONS, ExplorationBound, Model, Mutations, check_all, explore,
                             replay_in_kernel, replay_reproduces)

bound = ExplorationBound((2, 2), depth=2)
g = explore(bound)
print("states:", len(g), "edges:", len(g.edges), "exhausted:", g.frontier_exhausted)
for v in check_all(g):
    print("  %-8s %s" % (v.property, "pass" if v.passed else "FAIL"))

# seeded faults, each at the smallest bound that exposes it
small = {
    "drop-issue-guard": ExplorationBound((1, 1), depth=1),
    "drop-rx-p-exception": ExplorationBound((0, 2), depth=2),
    "drop-fifo-backpressure": ExplorationBound((2, 2), depth=1),
}
for name in MUTATIONS:
    m = Mutations.named(name)
    verdicts = check_all(explore(small[name], m))
    failed = [v for v in verdicts if not v.passed]
    print("\n%s: %s" % (name, ", ".join(v.property for v in failed)))
    v = failed[0]
    print("  path:", " ".join(v.path))
    print("  replays in the kernel:", replay_reproduces(Model(small[name], m), v))

# the mutex counterexample as a waveform: both drive flags end High
m = Mutations.named("drop-issue-guard")
v = check_all(explore(small["drop-issue-guard"], m))[0]
k, _ = replay_in_kernel(Model(small["drop-issue-guard"], m), v.path)
print("\nL.drive=%s R.drive=%s" % (k.read("L.drive").char, k.read("R.drive").char))
