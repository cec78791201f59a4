"""
Streaming events in one direction
=================================

The right block comes out of reset owning the bus, but only the left block
has traffic.  The link hands the bus over once and then streams.
"""

import numpy as np

from aerlink import saturated_workload, run_workload, switch_episodes

# 2,000 events waiting on the left at t=0
result = run_workload(saturated_workload(left=2000, initial_tx="right"))
report = result.report
k = result.kernel

print("delivered:", report["delivered"])
print("throughput: %.2f M events/s" % (report["throughput"] / 1e6))

# the request spacing is the whole story: one 4-phase cycle plus the FIFO stage
print("t_req2req (ps):", report["t_req2req"])

# the single hand-over at the start
for ep in switch_episodes(k.trace, k.initial):
    print("grant by %s at %d ps: t_sw=%d ps, t_sw2req=%d ps" % (ep.granter, ep.grant_at, ep.t_sw, ep.t_sw2req))

# latency grows linearly while the TX FIFO drains the backlog
lat = np.array([r["latency_ps"] for r in report["delivery_ledger"]]) / 1000
print("latency ns: first %.0f, median %.0f, last %.0f" % (lat[0], np.median(lat), lat[-1]))

# the trace is plain CSV for any waveform tool
result.write_trace("one_direction.csv")
