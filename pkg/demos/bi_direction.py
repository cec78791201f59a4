"""
Both sides saturated
====================

Each block may only ask for the bus after it has received one event, so with
traffic on both sides the direction flips after every event.
"""

from collections import Counter
from itertools import groupby

from aerlink import Workload, run_workload, saturated_workload

result = run_workload(saturated_workload(left=1000, right=1000))
report = result.report

dirs = [r["direction"] for r in report["delivery_ledger"]]
print("first directions:", [d.split("_")[0] for d in dirs[:8]])
# run length of consecutive same-direction deliveries
print("direction runs:", Counter(len(list(run)) for _, run in groupby(dirs)))

print("t_req2req (ps):", report["t_req2req"])
print("switches:", report["t_sw"]["count"], "each", report["t_sw"]["min"], "ps")
print("throughput: %.2f M events/s" % (report["throughput"] / 1e6))
print("energy: %.0f pJ for %d events" % (report["energy_total"], sum(report["delivered"].values())))

# a lighter, bursty load: the bus only turns around when the other side has work
w = Workload(left=[(0, i) for i in range(6)], right=[(120_000, 99)])
bursty = run_workload(w).report
print("bursty ledger:")
for r in bursty["delivery_ledger"]:
    print("  %-14s addr=%-3d delivered at %6d ps" % (r["direction"], r["address"], r["delivered_ps"]))
