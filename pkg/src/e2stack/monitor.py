"""Reference KPM monitoring xApp and the scenario runner behind ``kpm-monitor run``.

A scenario wires one RIC, one trace-driven node and one :class:`KpmMonitor`,
runs to the end of the trace and writes:

``kpm.csv``         per-bin throughput seen by the xApp (Mbps)
``app.csv``         per-bin application throughput from the trace (Mbps)
``report.txt``      per-bin offsets and their mean
``run.log``         JSON-lines log (inventory, available/selected functions, ...)
``inventory.json``  RIC inventory at the end of the run
``indications.hex`` node-emitted indication frames, one per line
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import kpm
from .e2ap import GlobalE2NodeId, PlmnError, frame
from .net import RicServer, ScenarioError, parse_address, run_node_tcp
from .node import E2NodeSim, OverheadModel
from .ric import CONNECTED, Ric
from .sim import Simulation
from .traces import TraceError, TrafficTrace, read_ue_events
from .xapp import DecodedIndication, XappContext, XappError, register

log = logging.getLogger(__name__)

INPROC = "inproc"
MONITOR_ID = "kpm-monitor"
CSV_HEADER = ("t_ms", "ue_id", "mbps")
NODE_LEVEL_UE = "all"


class ConfigError(ValueError):
    pass


class ComparisonError(ValueError):
    pass


# -- reference xApp ---------------------------------------------------------------


class KpmMonitor(XappContext):
    """Subscribes to the first connected node offering ``metrics`` and keeps
    every decoded indication.  Stops once no subscription is left."""

    def __init__(self, transport, xapp_id, registry=None, metrics=("DRB.UEThpDl",),
                 reporting_period_ms: int = 1000, granularity_ms: int | None = None):
        super().__init__(transport, xapp_id, registry)
        self.metrics = list(metrics)
        self.reporting_period_ms = reporting_period_ms
        self.granularity_ms = granularity_ms or reporting_period_ms
        self.indications: list[DecodedIndication] = []
        self.request_id = None
        self.node = None
        self.on_indication(self.indications.append)
        self.on_subscription_closed(self._closed)

    def logic(self) -> None:
        nodes = self.list_nodes()
        log.info("Inventory: %s", json.dumps(nodes))
        live = [n["inventoryName"] for n in nodes if n["connectionStatus"] == CONNECTED]
        if not live:
            raise XappError("no connected E2 node")
        self.node = live[0]
        functions = self.available_functions(self.node)
        wanted = set(self.metrics)
        for fid, info in sorted(functions.items()):
            if info.summary and any(wanted <= set(m) for m in info.summary.values()):
                break
        else:
            raise XappError(f"{self.node} offers no function with {sorted(wanted)}")
        self.request_id = self.subscribe(self.node, fid, self.metrics,
                                         self.reporting_period_ms, self.granularity_ms)

    def _closed(self, request_id, cause) -> None:
        if not self.subscriptions:
            self.stop()


# -- configuration ---------------------------------------------------------------

CONFIG_KEYS = (
    "ric_listen", "node_plmn", "node_gnb_id", "trace", "ue_events",
    "reporting_period_ms", "granularity_ms", "metrics", "header_overhead_bytes",
    "out_dir", "seed",
)


@dataclass
class ScenarioConfig:
    trace: Path
    ric_listen: str = INPROC
    node_plmn: str = "00F110"
    node_gnb_id: int = 0x00000E05
    ue_events: Path | None = None
    reporting_period_ms: int = 1000
    granularity_ms: int | None = None
    metrics: list[str] = field(default_factory=lambda: ["DRB.UEThpDl"])
    header_overhead_bytes: int = 43
    out_dir: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        if self.granularity_ms is None:
            self.granularity_ms = self.reporting_period_ms
        if not 1 <= self.reporting_period_ms <= 65536:
            raise ConfigError(f"reporting_period_ms {self.reporting_period_ms} outside [1, 65536]")
        if not 1 <= self.granularity_ms <= 65536 or self.reporting_period_ms % self.granularity_ms:
            raise ConfigError(f"granularity_ms {self.granularity_ms} must divide "
                              f"reporting_period_ms {self.reporting_period_ms}")
        if self.header_overhead_bytes < 0:
            raise ConfigError("header_overhead_bytes must be >= 0")
        if not self.metrics:
            raise ConfigError("metrics must not be empty")
        if not Path(self.trace).is_file():
            raise ConfigError(f"trace file not found: {self.trace}")
        if self.ue_events is not None and not Path(self.ue_events).is_file():
            raise ConfigError(f"ue_events file not found: {self.ue_events}")
        if self.ric_listen != INPROC:
            try:
                parse_address(self.ric_listen)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        try:
            self.node_id
        except (ValueError, PlmnError) as exc:
            raise ConfigError(f"bad node identity: {exc}") from None

    @property
    def node_id(self) -> GlobalE2NodeId:
        nid = GlobalE2NodeId.from_hex(self.node_plmn, self.node_gnb_id)
        nid.inventory_name  # validates the PLMN digits
        return nid


def _int(key, text):
    try:
        return int(text, 0)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {text!r}") from None


def parse_config(text: str, base_dir: Path = Path(".")) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    raw = dict(parser["scenario"])
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if not raw.get("trace"):
        raise ConfigError("config key 'trace' is required")

    def path(key):
        p = Path(raw[key])
        return p if p.is_absolute() else base_dir / p

    kw = {"trace": path("trace")}
    for key in ("ric_listen", "node_plmn"):
        if raw.get(key):
            kw[key] = raw[key]
    for key in ("node_gnb_id", "reporting_period_ms", "granularity_ms",
                "header_overhead_bytes", "seed"):
        if raw.get(key):
            kw[key] = _int(key, raw[key])
    if raw.get("ue_events"):
        kw["ue_events"] = path("ue_events")
    if raw.get("out_dir"):
        kw["out_dir"] = path("out_dir")
    if raw.get("metrics"):
        kw["metrics"] = [m.strip() for m in raw["metrics"].split(",") if m.strip()]
    return ScenarioConfig(**kw)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


# -- throughput series -----------------------------------------------------------

Series = dict  # (t_ms, ue_id) -> Mbps


def _direction(metrics) -> str:
    return "Dl" if {"DRB.UEThpDl", "DRB.PdcpSduVolumeDL"} & set(metrics) else "Ul"


def record_mbps(values, metrics, granularity_ms: int) -> float | None:
    """Throughput of one record in Mbps, from the throughput metric if
    present, else from the PDCP volume."""
    d = _direction(metrics)
    idx = {m: i for i, m in enumerate(metrics)}
    if f"DRB.UEThp{d}" in idx:
        v = values[idx[f"DRB.UEThp{d}"]]
        return None if v is None else v / 1000
    vol_name = f"DRB.PdcpSduVolume{d.upper()}"
    if vol_name not in idx or values[idx[vol_name]] is None:
        return None
    return values[idx[vol_name]] * 8 / granularity_ms / 1000


def kpm_series(indications, metrics, granularity_ms: int) -> Series:
    out: Series = {}
    for ind in indications:
        if ind.malformed or not hasattr(ind.header, "collection_start_time_ms"):
            continue
        t0 = ind.header.collection_start_time_ms
        if isinstance(ind.message, kpm.PerUeMessage):
            groups = [(r.ue_id, r.records) for r in ind.message.ue_reports]
        else:
            groups = [(NODE_LEVEL_UE, ind.message.records)]
        for ue, records in groups:
            for i, rec in enumerate(records):
                mbps = record_mbps(rec.values, metrics, granularity_ms)
                if mbps is not None:
                    out[(t0 + i * granularity_ms, ue)] = mbps
    return out


def app_series(trace: TrafficTrace, keys, granularity_ms: int, direction: str = "Dl") -> Series:
    """Application-layer throughput for the same bins as ``keys``."""
    attr = "dl_app_bytes" if direction == "Dl" else "ul_app_bytes"
    out: Series = {}
    for t, ue in keys:
        ues = trace.ue_ids if ue == NODE_LEVEL_UE else [ue]
        nbytes = sum(getattr(r, attr) for u in ues for r in trace.rows_for(u, t, t + granularity_ms))
        out[(t, ue)] = nbytes * 8 / granularity_ms / 1000
    return out


def series_csv(series: Series) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for (t, ue), v in sorted(series.items()):
        w.writerow((t, ue, f"{v:.6f}"))
    return buf.getvalue()


def read_series(path) -> Series:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ComparisonError(f"{path}: header must be {','.join(CSV_HEADER)}")
        out: Series = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                t, ue, v = rec
                out[(int(t), ue)] = float(v)
            except ValueError:
                raise ComparisonError(f"{path}:{lineno}: bad row {rec!r}") from None
    return out


# -- comparison ---------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    t_ms: int
    ue_id: str
    app_mbps: float
    kpm_mbps: float

    @property
    def rel_offset(self) -> float | None:
        return self.kpm_mbps / self.app_mbps - 1 if self.app_mbps > 0 else None


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]

    @property
    def offsets(self) -> list[float]:
        return [r.rel_offset for r in self.rows if r.rel_offset is not None]

    @property
    def mean_rel_offset(self) -> float:
        offs = self.offsets
        return math.fsum(offs) / len(offs) if offs else 0.0

    @property
    def max_abs_offset(self) -> float:
        return max((abs(r.kpm_mbps - r.app_mbps) for r in self.rows), default=0.0)

    def render(self) -> str:
        lines = [f"{'t_ms':>8} {'ue_id':>8} {'app_mbps':>14} {'kpm_mbps':>14} {'rel_offset':>11}"]
        for r in self.rows:
            off = "n/a" if r.rel_offset is None else f"{r.rel_offset:+.4%}"
            lines.append(f"{r.t_ms:>8} {r.ue_id:>8} {r.app_mbps:>14.6f} "
                         f"{r.kpm_mbps:>14.6f} {off:>11}")
        lines.append(f"bins: {len(self.rows)}  with traffic: {len(self.offsets)}")
        lines.append(f"mean_rel_offset: {self.mean_rel_offset:+.9f} ({self.mean_rel_offset:+.4%})")
        lines.append(f"max_abs_offset_mbps: {self.max_abs_offset:.6f}")
        return "\n".join(lines) + "\n"


def compare_series(app: Series, kpm_: Series) -> ComparisonReport:
    if set(app) != set(kpm_):
        only_app = sorted(set(app) - set(kpm_))[:3]
        only_kpm = sorted(set(kpm_) - set(app))[:3]
        raise ComparisonError(f"bins do not align (app only: {only_app}, kpm only: {only_kpm})")
    return ComparisonReport(tuple(ComparisonRow(t, ue, app[(t, ue)], kpm_[(t, ue)])
                                  for t, ue in sorted(app)))


def compare_sequences(app, kpm_, step_ms: int = 1000, ue_id: str = "ue1") -> ComparisonReport:
    """Compare two equally long per-second series (bins t = 1, 2, ...)."""
    if len(app) != len(kpm_):
        raise ComparisonError(f"series lengths differ: {len(app)} vs {len(kpm_)}")
    keys = [((i + 1) * step_ms, ue_id) for i in range(len(app))]
    return compare_series(dict(zip(keys, map(float, app))), dict(zip(keys, map(float, kpm_))))


# -- scenario ---------------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    indications: list[DecodedIndication]
    indication_frames: list[bytes]
    inventory: list[dict]
    kpm: Series
    app: Series
    report: ComparisonReport


class _JsonLines(logging.Handler):
    def __init__(self):
        super().__init__(logging.INFO)
        self.lines: list[str] = []
        self._lock_lines = threading.Lock()

    def emit(self, record):
        entry = {"level": record.levelname, "logger": record.name, "msg": record.getMessage()}
        with self._lock_lines:
            self.lines.append(json.dumps(entry))


def build_node(config: ScenarioConfig) -> E2NodeSim:
    trace = TrafficTrace.read_csv(config.trace)
    events = read_ue_events(config.ue_events) if config.ue_events else ()
    return E2NodeSim(config.node_id, trace, events,
                     OverheadModel(config.header_overhead_bytes))


def _run_inproc(config, node, monitor_kw):
    sim = Simulation(Ric(), seed=config.seed)
    sim.add_node(node)
    mon = sim.register_xapp(MONITOR_ID, cls=KpmMonitor, **monitor_kw)
    mon.run()
    mon.close()
    return mon, sim.ric.inventory_snapshot(), sim.indication_frames


def _run_tcp(config, node, monitor_kw):
    host, port = parse_address(config.ric_listen)
    ready = threading.Event()
    failure: list[BaseException] = []
    with RicServer(Ric(), host, port) as server:
        def node_main():
            try:
                run_node_tcp(node, server.address, ready=ready)
            except BaseException as exc:
                failure.append(exc)

        t = threading.Thread(target=node_main, name="e2-node", daemon=True)
        t.start()
        ready.wait(timeout=10)
        if failure:
            raise ScenarioError(str(failure[0]))
        mon = register(server.address, MONITOR_ID, cls=KpmMonitor, **monitor_kw)
        try:
            mon.run()
        finally:
            mon.close()
        t.join(timeout=30)
        if failure:
            raise ScenarioError(str(failure[0]))
        inventory = server.ric.inventory_snapshot()
    frames = [frame(m) for m in node.indications]
    return mon, inventory, frames


def run_scenario(config: ScenarioConfig, write: bool = True) -> ScenarioResult:
    try:
        node = build_node(config)
    except (TraceError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    handler = _JsonLines()
    root = logging.getLogger("e2stack")
    old_level = root.level
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    monitor_kw = dict(metrics=config.metrics, reporting_period_ms=config.reporting_period_ms,
                      granularity_ms=config.granularity_ms)
    try:
        try:
            if config.ric_listen == INPROC:
                mon, inventory, frames = _run_inproc(config, node, monitor_kw)
            else:
                mon, inventory, frames = _run_tcp(config, node, monitor_kw)
        except (XappError, OSError) as exc:
            raise ScenarioError(str(exc)) from exc
    finally:
        root.removeHandler(handler)
        root.setLevel(old_level)
    kpm_ = kpm_series(mon.indications, config.metrics, config.granularity_ms)
    app = app_series(node.trace, kpm_.keys(), config.granularity_ms, _direction(config.metrics))
    report = compare_series(app, kpm_)
    result = ScenarioResult(config, mon.indications, frames, inventory, kpm_, app, report)
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "kpm.csv").write_text(series_csv(kpm_), encoding="utf-8")
        (out / "app.csv").write_text(series_csv(app), encoding="utf-8")
        (out / "report.txt").write_text(report.render(), encoding="utf-8")
        (out / "inventory.json").write_text(json.dumps(inventory, indent=2) + "\n",
                                            encoding="utf-8")
        (out / "indications.hex").write_text("".join(f.hex().upper() + "\n" for f in frames),
                                             encoding="utf-8")
        (out / "run.log").write_text("".join(line + "\n" for line in handler.lines),
                                     encoding="utf-8")
    return result
