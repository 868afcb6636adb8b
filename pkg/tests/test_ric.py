import json

import pytest

from e2stack import kpm
from e2stack import northbound as nb
from e2stack.e2ap import (
    Cause,
    E2SetupFailure,
    E2SetupRequest,
    E2SetupResponse,
    ErrorIndication,
    GlobalE2NodeId,
    RanFunctionItem,
    RicIndication,
    RicRequestId,
    RicSubscriptionRequest,
    RicSubscriptionResponse,
    SubscriptionState,
)
from e2stack.kpm import ActionDefinition, EventTriggerDefinition
from e2stack.ric import CONNECTED, DISCONNECTED, Ric
from e2stack.sim import Simulation

from conftest import NODE_ID, NODE_NAME, make_node

REFERENCE_RECORD = {
    "inventoryName": "gnb_001_001_00000e05",
    "globalNbId": {"plmnId": "00F110", "nbId": "00000000000000000000111000000101"},
    "connectionStatus": "CONNECTED",
}


def setup_msg(ids=(147,), node_id=NODE_ID):
    definition = kpm.encode_ran_function_definition(kpm.reference_function_definition())
    return E2SetupRequest(node_id, [RanFunctionItem(i, definition, 1, "KPM", "3.00")
                                    for i in ids])


def subscribe_msg(metrics=("DRB.UEThpDl",), node=NODE_NAME, fid=147):
    action = kpm.encode_action_definition(ActionDefinition(3, list(metrics), 1000))
    trig = kpm.encode_event_trigger(EventTriggerDefinition(1000))
    return nb.SubscribeRequest(node, fid, trig.hex().upper(), action.hex().upper())


@pytest.fixture
def ric():
    r = Ric()
    assert r.receive("n", setup_msg()) == [("n", E2SetupResponse([147], []))]
    r.receive("x", nb.XAppRegister("x1"))
    return r


def test_inventory_record_shape(ric):
    assert ric.inventory_snapshot() == [REFERENCE_RECORD]
    assert json.loads(ric.inventory_json()) == [REFERENCE_RECORD]
    assert ric.inventory_snapshot() == ric.inventory_snapshot()
    assert Ric().inventory_snapshot() == []


def test_snapshot_is_a_copy(ric):
    snap = ric.inventory_snapshot()
    snap[0]["connectionStatus"] = "X"
    assert ric.nodes[NODE_NAME].connection_status == CONNECTED


def test_definition_hex_is_exact(ric):
    fn = ric.nodes[NODE_NAME].functions[147]
    assert fn.definition_hex == setup_msg().functions[0].definition.hex().upper()
    assert fn.revision == 1


def test_duplicate_function_id_rejected():
    out = Ric().receive("n", setup_msg(ids=(3, 3)))
    resp = out[0][1]
    assert resp.accepted_ids == (3,)
    assert [(r.ran_function_id, r.cause) for r in resp.rejected_ids] == [(3, Cause.UNSPECIFIED)]


def test_bad_plmn_fails_setup():
    out = Ric().receive("n", setup_msg(node_id=GlobalE2NodeId(b"\xaa\xaa\xaa", 1)))
    assert out == [("n", E2SetupFailure(Cause.UNSPECIFIED))]


def test_reconnect_flips_status_and_replaces_functions(ric):
    ric.connection_lost("n")
    assert ric.inventory_snapshot()[0]["connectionStatus"] == DISCONNECTED
    ric.receive("n2", setup_msg(ids=(5,)))
    assert ric.inventory_snapshot()[0]["connectionStatus"] == CONNECTED
    assert list(ric.nodes[NODE_NAME].functions) == [5]


def test_subscribe_forwards_and_tracks_pending(ric):
    out = ric.receive("x", subscribe_msg())
    (conn, req), = out
    assert conn == "n" and isinstance(req, RicSubscriptionRequest)
    assert ric.subscriptions[req.request_id].state is SubscriptionState.PENDING
    out = ric.receive("n", RicSubscriptionResponse(req.request_id, [0]))
    assert out == [("x", nb.SubscribeResponse(req.request_id, True))]
    assert ric.subscriptions[req.request_id].state is SubscriptionState.ACTIVE


@pytest.mark.parametrize("msg, cause", [
    (subscribe_msg(node="gnb_999_99_00000001"), Cause.NODE_UNAVAILABLE),
    (subscribe_msg(fid=9), Cause.UNSUPPORTED_FUNCTION),
    (subscribe_msg(metrics=["NoSuch.Metric"]), Cause.UNKNOWN_METRIC),
])
def test_subscribe_refusals_send_nothing_to_node(ric, msg, cause):
    out = ric.receive("x", msg)
    assert out == [("x", nb.SubscribeResponse(nb.NO_REQUEST, False, cause))]


def test_subscribe_to_disconnected_node(ric):
    ric.connection_lost("n")
    (conn, resp), = ric.receive("x", subscribe_msg())
    assert conn == "x" and resp.cause is Cause.NODE_UNAVAILABLE


def test_two_xapps_get_distinct_request_ids(ric):
    ric.receive("y", nb.XAppRegister("x2"))
    a = ric.receive("x", subscribe_msg())[0][1].request_id
    b = ric.receive("y", subscribe_msg())[0][1].request_id
    c = ric.receive("x", subscribe_msg())[0][1].request_id
    assert len({a, b, c}) == 3


def test_duplicate_xapp_id_rejected(ric):
    out = ric.receive("z", nb.XAppRegister("x1"))
    assert out == [("z", nb.XAppRegisterResponse(False, Cause.DUPLICATE_XAPP))]


def active_sub(ric):
    rid = ric.receive("x", subscribe_msg())[0][1].request_id
    ric.receive("n", RicSubscriptionResponse(rid, [0]))
    return rid


def test_indications_are_routed_with_verdicts(ric):
    rid = active_sub(ric)
    verdicts = []
    for sn in (0, 1, 2, 2, 5):
        (conn, fwd), = ric.receive("n", RicIndication(rid, 0, sn, b"\x01", b"\x02"))
        assert conn == "x" and fwd.header_hex == "01" and fwd.message_hex == "02"
        verdicts.append(fwd.verdict.label)
    assert verdicts == ["ok", "ok", "ok", "duplicate", "gap"]
    assert ric.counters["sn_duplicate"] == 1 and ric.counters["sn_gap"] == 1


def test_unknown_request_gets_error_indication(ric):
    out = ric.receive("n", RicIndication(RicRequestId(9, 9), 0, 0, b"", b""))
    assert out == [("n", ErrorIndication(Cause.UNKNOWN_REQUEST))]
    assert ric.counters["unknown_request"] == 1


def test_node_disconnect_notifies_each_subscription(ric):
    a, b = active_sub(ric), active_sub(ric)
    out = ric.connection_lost("n")
    assert sorted(out, key=lambda o: str(o[1].request_id)) == [
        ("x", nb.SubscriptionClosed(r, Cause.NODE_DISCONNECTED))
        for r in sorted([a, b], key=str)]
    assert not ric.subscriptions
    assert ric.handle_node_disconnect("gnb_nope") == []


def test_disconnect_while_pending_refuses(ric):
    rid = ric.receive("x", subscribe_msg())[0][1].request_id
    out = ric.connection_lost("n")
    assert out == [("x", nb.SubscribeResponse(rid, False, Cause.NODE_DISCONNECTED))]


def test_xapp_leaving_deletes_its_subscriptions(ric):
    rid = active_sub(ric)
    out = ric.connection_lost("x")
    assert [(c, type(m).__name__, m.request_id) for c, m in out] == [
        ("n", "RicSubscriptionDeleteRequest", rid)]


def test_replay_reproduces_inventory(ric):
    active_sub(ric)
    ric.connection_lost("n")
    ric.receive("n3", setup_msg(node_id=GlobalE2NodeId.from_hex("21F354", 7)))
    assert Ric.replay(ric.history).inventory_snapshot() == ric.inventory_snapshot()


def test_each_subscription_stays_ordered_under_random_interleaving():
    for seed in range(8):
        sim = Simulation(seed=seed)
        node = make_node()
        other = make_node(node_id=GlobalE2NodeId.from_hex("00F110", 0xE06))
        sim.add_node(node)
        sim.add_node(other)
        ctxs = [sim.register_xapp(f"x{i}") for i in range(2)]
        seen = {}
        for i, ctx in enumerate(ctxs):
            ctx.on_indication(lambda ind, i=i: seen.setdefault((i, ind.request_id), []).append(
                (ind.sn, ind.node)))
            ctx._running = True
        for ctx in ctxs:
            for n in (node, other):
                ctx.subscribe(n.name, 147, ["DRB.UEThpDl"], 1000, 500)
        sim.run()
        assert len(seen) == 4
        for deliveries in seen.values():
            assert [sn for sn, _ in deliveries] == list(range(20))
            assert len({name for _, name in deliveries}) == 1
