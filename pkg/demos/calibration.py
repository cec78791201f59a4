"""
Fitting component delays to measured aggregates
===============================================

Only three aggregate timings are known.  With the gate step fixed, each one
pins down one more component delay; simulation then reads them back.
"""

from aerlink.harness import calibrate, measured_aggregates, predicted_aggregates
from aerlink.errors import CalibrationError

for targets in [(5000, 31000, 35000), (10000, 62000, 70000), (7000, 40000, 41000)]:
    profile = calibrate(*targets)
    print(targets, "->", profile.as_dict())
    print("   predicted:", predicted_aggregates(profile))
    print("   measured: ", measured_aggregates(profile))

# inconsistent or too-fast targets say which constraint binds
for targets in [(5000, 31000, 30000), (5000, 12000, 35000), (5000, 31000, 90000)]:
    try:
        calibrate(*targets)
    except CalibrationError as exc:
        print(targets, "infeasible:", exc)
