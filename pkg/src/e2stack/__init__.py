"""Desk-scale O-RAN E2 stack: PER codec, KPM service model, E2AP framing,
a near-RT RIC simulator, a trace-driven gNB simulator and an xApp SDK."""
from . import northbound  # registers the xApp message family
from .e2ap import GlobalE2NodeId, RicRequestId
from .kpm import (
    ActionDefinition,
    EventTriggerDefinition,
    IndicationHeader,
    MeasRecord,
    NodeLevelMessage,
    PerUeMessage,
    UeReport,
)
from .node import E2NodeSim, OverheadModel, pdcp_bytes
from .registry import SmRegistry, default_registry
from .ric import Ric
from .sim import Simulation
from .traces import TrafficTrace, generate_trace
from .xapp import DecodedIndication, XappContext, register

__version__ = "0.1.0"

__all__ = [
    "ActionDefinition", "DecodedIndication", "E2NodeSim", "EventTriggerDefinition",
    "GlobalE2NodeId", "IndicationHeader", "MeasRecord", "NodeLevelMessage", "OverheadModel",
    "PerUeMessage", "Ric", "RicRequestId", "Simulation", "SmRegistry", "TrafficTrace",
    "UeReport", "XappContext", "default_registry", "generate_trace", "northbound",
    "pdcp_bytes", "register",
]
