"""
Why the xApp reads higher than iPerf
====================================

Each packet gains a fixed header below the application, so the relative
offset is h / payload.  Small uplink packets make it large.
"""

# %%
from e2stack import published
from e2stack.monitor import compare_sequences
from e2stack.node import OverheadModel, pdcp_bytes

h = OverheadModel().header_overhead_bytes
for payload in (1400, 1000, 500, 380, 200):
    pkts = 1000
    app = pkts * payload
    print(f"payload {payload:>5} B  offset {pdcp_bytes(app, pkts) / app - 1:+.2%}")

# %%
# The same comparison applied to published over-the-air samples.
for name, (app, xapp) in published.SERIES.items():
    report = compare_sequences(app, xapp)
    print(f"{name}: {len(report.offsets)} pairs  mean {report.mean_rel_offset:+.3%}  "
          f"largest gap {report.max_abs_offset:.2f} Mbps")

# %%
print(compare_sequences(*published.SERIES["fig6b-ul"]).render())
