"""
The same loop over real sockets
===============================

The RIC listens on an ephemeral port, the node runs in a thread and the xApp
connects with ``register``.
"""

# %%
import threading

from e2stack import generate_trace, register
from e2stack.e2ap import GlobalE2NodeId
from e2stack.net import RicServer, run_node_tcp
from e2stack.node import E2NodeSim

node = E2NodeSim(GlobalE2NodeId.from_hex("21F354", 7), generate_trace("constant", 5))

with RicServer() as server:
    print("RIC on %s:%d" % server.address)
    ready = threading.Event()
    threading.Thread(target=run_node_tcp, args=(node, server.address),
                     kwargs={"ready": ready}, daemon=True).start()
    ready.wait(5)

    xapp = register(server.address, "tcp-demo")
    print([n["inventoryName"] for n in xapp.list_nodes()])

    # %%
    seen = []
    xapp.on_indication(lambda ind: seen.append((ind.sn, ind.verdict.label)))
    xapp.on_subscription_closed(lambda rid, cause: xapp.stop())
    try:
        xapp.run(lambda: xapp.subscribe(node.name, 147, ["DRB.UEThpDl"], 1000))
    finally:
        xapp.close()
    print(seen)
