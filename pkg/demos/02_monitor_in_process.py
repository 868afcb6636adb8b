"""
Watching one gNB from an xApp
=============================

A RIC, a trace-driven node and an xApp share a virtual clock, so twenty
seconds of reports arrive instantly and always in the same order.
"""

# %%
from e2stack import Simulation, generate_trace
from e2stack.e2ap import GlobalE2NodeId
from e2stack.node import E2NodeSim

trace = generate_trace("fig5-dl", duration_s=20, payload_bytes=1400)
node = E2NodeSim(GlobalE2NodeId.from_hex("00F110", 0xE05), trace)

sim = Simulation(seed=0)
sim.add_node(node)
xapp = sim.register_xapp("demo")
print(xapp.list_nodes())

# %%
functions = xapp.available_functions(node.name)
for fid, info in functions.items():
    print(fid, info.summary)

# %%
rows = []


def on_report(ind):
    for report in ind.message.ue_reports:
        (thp_kbps,) = report.records[0].values
        rows.append((ind.header.collection_start_time_ms, report.ue_id, thp_kbps / 1000))


xapp.on_indication(on_report)
xapp.on_subscription_closed(lambda rid, cause: xapp.stop())
xapp.run(lambda: xapp.subscribe(node.name, 147, ["DRB.UEThpDl"], reporting_period_ms=1000))

# %%
# PDCP sits below the transport headers, so it counts 43 more bytes per packet.
for t, ue, mbps in rows[:5]:
    app = sum(r.dl_app_bytes for r in trace.rows_for(ue, t, t + 1000)) * 8 / 1e6
    print(f"t={t:>6} {ue} xapp={mbps:8.3f} Mbps  app={app:8.3f} Mbps  {mbps / app - 1:+.2%}")
print(len(rows), "reports")
