import random
from collections import Counter

import pytest

from e2stack import kpm
from e2stack.e2ap import (
    Cause,
    E2SetupResponse,
    RicAction,
    RicControlRequest,
    RicRequestId,
    RicSubscriptionDeleteRequest,
    RicSubscriptionFailure,
    RicSubscriptionRequest,
    RicSubscriptionResponse,
)
from e2stack.kpm import ActionDefinition, EventTriggerDefinition
from e2stack.node import (
    DEFAULT_MODEL,
    OverheadModel,
    build_indication,
    compute_record,
    pdcp_bytes,
)
from e2stack.traces import TraceRow, TrafficTrace, UeEvent, attachment_intervals

from conftest import make_node

RID = RicRequestId(1, 1)


def sub_request(metrics=("DRB.UEThpDl",), period=1000, g=1000, style=3, fid=147):
    action = kpm.encode_action_definition(ActionDefinition(style, list(metrics), g))
    return RicSubscriptionRequest(RID, fid, kpm.encode_event_trigger(
        EventTriggerDefinition(period)), [RicAction(0, action)])


def test_pdcp_bytes():
    assert pdcp_bytes(1_400_000, 1000) == 1_443_000
    assert pdcp_bytes(12345, 0) == 12345
    assert pdcp_bytes(100, 2, OverheadModel(0)) == 100
    with pytest.raises(ValueError):
        OverheadModel(-1)


def test_relative_overhead_is_h_over_payload():
    rng = random.Random(4)
    for _ in range(100):
        payload, pkts = rng.randint(100, 1500), rng.randint(1, 10_000)
        h = rng.randint(0, 80)
        app = payload * pkts
        assert (pdcp_bytes(app, pkts, OverheadModel(h)) - app) * payload == h * app


def test_record_units():
    rows = [TraceRow(0, 1000, "u", dl_app_bytes=125_000 - 43 * 10, dl_pkts=10)]
    rec = compute_record(rows, 1000, ["DRB.PdcpSduVolumeDL", "DRB.UEThpDl"])
    assert rec.values == (125_000, 1000.0)


def test_record_delay_and_prbs():
    rows = [TraceRow(0, 500, "u", dl_app_bytes=100, prb_dl=3, prb_ul=1, rlc_delay_dl_ms=2.0),
            TraceRow(500, 500, "u", dl_app_bytes=300, prb_dl=4, rlc_delay_dl_ms=6.0)]
    rec = compute_record(rows, 1000, ["DRB.RlcSduDelayDl", "RRU.PrbTotDl", "RRU.PrbTotUl"])
    assert rec.values == (5.0, 7, 1)
    assert compute_record([TraceRow(0, 1, "u")], 1, ["DRB.RlcSduDelayDl"]).values == (None,)


def test_unknown_metric_is_counted_not_fatal():
    warnings = Counter()
    rec = compute_record([], 1000, ["DRB.UEThpDl", "Foo.Bar"], warnings=warnings)
    assert rec.values == (0.0, None)
    assert warnings == {"Foo.Bar": 1}


def test_granularity_bins_sum_to_the_window():
    rng = random.Random(9)
    rows = [TraceRow(t, 100, "u", dl_app_bytes=rng.randint(0, 10**6), dl_pkts=rng.randint(0, 700))
            for t in range(0, 1000, 100)]
    trace = TrafficTrace(rows)
    att = attachment_intervals([], trace.ue_ids)
    fine = build_indication(trace, att, ActionDefinition(3, ["DRB.PdcpSduVolumeDL"], 250),
                            0, 1000, "n")[1]
    whole = build_indication(trace, att, ActionDefinition(3, ["DRB.PdcpSduVolumeDL"], 1000),
                             0, 1000, "n")[1]
    assert len(fine.ue_reports[0].records) == 4
    assert sum(r.values[0] for r in fine.ue_reports[0].records) == \
        whole.ue_reports[0].records[0].values[0]


def test_build_indication_shapes():
    rows = [TraceRow(t, 1000, ue, dl_app_bytes=1) for t in range(0, 3000, 1000)
            for ue in ("a", "b")]
    trace = TrafficTrace(rows)
    att = attachment_intervals([UeEvent(1000, "b", "detach")], trace.ue_ids)
    action = ActionDefinition(3, ["DRB.UEThpDl"], 1000)
    hdr, msg = build_indication(trace, att, action, 0, 1000, "gnb")
    assert hdr == kpm.IndicationHeader(0, "gnb")
    assert [r.ue_id for r in msg.ue_reports] == ["a", "b"]
    _, msg = build_indication(trace, att, action, 1000, 1000, "gnb")
    assert [r.ue_id for r in msg.ue_reports] == ["a"]
    _, msg = build_indication(TrafficTrace(), {}, action, 0, 1000, "gnb")
    assert msg == kpm.PerUeMessage([])


def test_node_level_style_aggregates():
    rows = [TraceRow(0, 1000, ue, dl_app_bytes=10, dl_pkts=1) for ue in ("a", "b")]
    trace = TrafficTrace(rows)
    _, msg = build_indication(trace, attachment_intervals([], trace.ue_ids),
                              ActionDefinition(0, ["DRB.PdcpSduVolumeDL"], 1000), 0, 1000, "n")
    assert msg == kpm.NodeLevelMessage([kpm.MeasRecord([2 * (10 + 43)])])


def test_setup_offers_the_seven_metrics_under_style_3(node_id):
    node = make_node()
    req = node.setup_request()
    item, = req.functions
    assert (item.ran_function_id, item.sm_name, item.sm_version) == (147, "KPM", "3.00")
    summary = kpm.function_definition_summary(kpm.decode_ran_function_definition(item.definition))
    assert summary[3] == list(kpm.REFERENCE_METRICS)
    node.receive(E2SetupResponse([147]))
    assert node.setup_accepted


def test_twenty_windows_give_sns_0_to_19():
    node = make_node()
    out = node.receive(sub_request())
    assert isinstance(out[0], RicSubscriptionResponse)
    inds = node.advance(10**9)
    assert [i.sequence_number for i in inds] == list(range(20))
    assert node.next_deadline() is None


def test_delete_stops_reports():
    node = make_node()
    node.receive(sub_request())
    node.advance(5000)
    node.receive(RicSubscriptionDeleteRequest(RID))
    node.advance(20000)
    assert max(i.sequence_number for i in node.indications) == 4


@pytest.mark.parametrize("req, cause", [
    (sub_request(fid=9), Cause.UNSUPPORTED_FUNCTION),
    (sub_request(style=2), Cause.UNKNOWN_METRIC),
    (sub_request(metrics=["NoSuch.Metric"]), Cause.UNKNOWN_METRIC),
    (sub_request(g=300), Cause.UNSPECIFIED),
])
def test_admission_failures(req, cause):
    out = make_node().receive(req)
    assert out == [RicSubscriptionFailure(RID, cause)]


def test_control_is_logged_and_acked():
    node = make_node()
    out = node.receive(RicControlRequest(RID, 147, b"\x01", b"\x02\x03", True))
    assert node.control_log == [(0, b"\x01", b"\x02\x03")]
    assert out[0].request_id == RID
    assert node.receive(RicControlRequest(RID, 147, b"", b"", False)) == []


def test_report_offset_shifts_windows():
    node = make_node(report_offset_ms=250)
    node.receive(sub_request())
    first = node.advance(1250)[0]
    assert kpm.decode_indication_header(first.header).collection_start_time_ms == 250


def test_default_model_is_43_bytes():
    assert DEFAULT_MODEL.header_overhead_bytes == 43
