import math

import pytest

from e2stack.published import OAI_DL_IPERF
from e2stack.traces import (
    TRACE_COLUMNS,
    TraceError,
    TraceRow,
    TrafficTrace,
    UeEvent,
    attachment_intervals,
    generate_trace,
    read_ue_events,
    write_ue_events,
)


def test_header_is_exact():
    assert ",".join(TRACE_COLUMNS) == (
        "t_ms,interval_ms,ue_id,dl_app_bytes,ul_app_bytes,dl_pkts,ul_pkts,prb_dl,prb_ul,"
        "rlc_delay_dl_ms")
    with pytest.raises(TraceError):
        TrafficTrace.from_csv("t_ms,ue_id\n")


def test_csv_round_trip(tmp_path):
    trace = generate_trace("fig5-dl", 5, ues=2, seed=3)
    trace.write_csv(tmp_path / "t.csv")
    back = TrafficTrace.read_csv(tmp_path / "t.csv")
    assert back.rows == trace.rows


def test_zero_duration_is_header_only():
    assert generate_trace("constant", 0).to_csv() == ",".join(TRACE_COLUMNS) + "\n"
    assert TrafficTrace().to_csv() == generate_trace("constant", 0).to_csv()


@pytest.mark.parametrize("kw", [{"duration_s": -1}, {"ues": 0}])
def test_degenerate_generation_rejected(kw):
    with pytest.raises(TraceError):
        generate_trace(**{"profile": "constant", "duration_s": 2, **kw})


def test_overlap_and_negative_rejected():
    with pytest.raises(TraceError):
        TrafficTrace([TraceRow(0, 1000, "a"), TraceRow(500, 1000, "a")])
    with pytest.raises(TraceError):
        TrafficTrace([TraceRow(0, 1000, "a", dl_app_bytes=-1)])
    with pytest.raises(TraceError):
        TrafficTrace([TraceRow(0, 0, "a")])
    TrafficTrace([TraceRow(0, 1000, "a"), TraceRow(500, 1000, "b")])


def test_unknown_profile():
    with pytest.raises(TraceError):
        generate_trace("sawtooth", 5)


def test_packets_are_ceil_of_bytes_over_payload():
    for row in generate_trace("constant", 5, rate_mbps=7.3, payload_bytes=380).rows:
        assert row.dl_pkts == math.ceil(row.dl_app_bytes / 380)


def test_fig5_profile_reproduces_the_app_series():
    rows = generate_trace("fig5-dl", 20).rows
    mbps = [r.dl_app_bytes * 8 / 1e6 for r in rows]
    # whole 1400-byte segments: within half a segment of the nominal rate
    for got, want in zip(mbps, OAI_DL_IPERF):
        assert abs(got - want) <= 1400 * 8 / 2 / 1e6


def test_generation_is_seeded():
    a = generate_trace("fig5-dl", 10, seed=1).to_csv()
    assert a == generate_trace("fig5-dl", 10, seed=1).to_csv()
    assert a != generate_trace("fig5-dl", 10, seed=2).to_csv()


def test_attachment_intervals():
    events = [UeEvent(3000, "ue1", "detach"), UeEvent(1000, "ue2", "attach"),
              UeEvent(5000, "ue2", "detach"), UeEvent(7000, "ue2", "attach")]
    iv = attachment_intervals(events, ["ue1", "ue2", "ue3"])
    assert iv == {"ue1": [(0, 3000)], "ue2": [(1000, 5000), (7000, math.inf)],
                  "ue3": [(0, math.inf)]}


def test_detach_requires_attach():
    with pytest.raises(TraceError):
        attachment_intervals([UeEvent(1, "a", "detach"), UeEvent(2, "a", "detach")], ["a"])


def test_events_csv(tmp_path):
    events = [UeEvent(1000, "ue1", "detach")]
    write_ue_events(tmp_path / "e.csv", events)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t_ms,ue_id,kind"
    assert read_ue_events(tmp_path / "e.csv") == events
