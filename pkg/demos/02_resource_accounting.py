"""Parameter, storage, operation and memory accounting.

Every number below comes from the layer table alone, so it can be checked
without training anything. Binary layers store one bit per weight; batch
norm and the thresholds stay at 32 bits.
"""

from bnn_ecg.accounting import compare, format_table
from bnn_ecg.models import baseline_spec, binarized_spec, shape_plan

base = baseline_spec()
print("activation lengths:", shape_plan(base, 3600))

for name in ("btpn", "btpn-alpha"):
    base_report, bin_report = compare(base, binarized_spec(name))
    print()
    print(format_table(base_report, bin_report))
