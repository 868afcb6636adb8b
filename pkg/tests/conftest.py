import pytest

from e2stack import kpm
from e2stack.e2ap import GlobalE2NodeId
from e2stack.node import E2NodeSim
from e2stack.sim import Simulation
from e2stack.traces import generate_trace

NODE_ID = GlobalE2NodeId.from_hex("00F110", 0x00000E05)
NODE_NAME = "gnb_001_001_00000e05"
KPM_FUNCTION = 147


@pytest.fixture
def node_id():
    return NODE_ID


def make_node(trace=None, events=(), node_id=NODE_ID, **kw):
    if trace is None:
        trace = generate_trace("fig5-dl", 20)
    return E2NodeSim(node_id, trace, events, **kw)


@pytest.fixture
def scenario():
    """A simulation with the reference node connected and one registered xApp."""
    def build(trace=None, events=(), seed=0, xapp_id="x1", **node_kw):
        sim = Simulation(seed=seed)
        node = make_node(trace, events, **node_kw)
        sim.add_node(node)
        ctx = sim.register_xapp(xapp_id)
        return sim, node, ctx
    return build


def subscribe_all(ctx, metrics=kpm.REFERENCE_METRICS, period=1000, g=None):
    return ctx.subscribe(NODE_NAME, KPM_FUNCTION, metrics, period, g or period)


def write_config(directory, trace=None, **overrides):
    """Write a trace and a key=value config for it; returns the config path."""
    if trace is None:
        trace = generate_trace("fig5-dl", 20)
    trace.write_csv(directory / "trace.csv")
    keys = {"trace": "trace.csv", "out_dir": "out", **overrides}
    path = directory / "scenario.conf"
    path.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()), encoding="utf-8")
    return path


# -- acceptance summary -------------------------------------------------------

CRITERIA = {
    1: "codec round trip, 1000 instances per type, < 30 s",
    2: "event trigger 1000 ms encodes to 03 E7",
    3: "inventory identity and disconnect status",
    4: "downlink run: 20 indications, 43/1400 overhead, published mean pinned, < 10 s",
    5: "uplink: published mean pinned, 43/380 overhead",
    6: "volume and throughput conservation over 100 random scenarios",
    7: "subscription FSM brute force to length 6, < 5 s",
    8: "delete at 5 s and UE detach",
    9: "bit-flipped indication is delivered malformed, 100 good ones follow",
    10: "byte-identical outputs across two runs",
}
_criterion_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" or (report.when == "setup" and not report.passed):
        for marker in item.iter_markers("criterion"):
            _criterion_outcomes.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _criterion_outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status:<7} {title}")
