"""Throughput series (Mbps, one sample per second, t = 1..N) measured with
iPerf3 at the application layer and with a KPM xApp at PDCP, over the air.

``OAI_*`` come from an OpenAirInterface gNB (100 MHz), ``SRS_*`` from an
srsRAN gNB (40 MHz, uplink capped at 10 Mbps).
"""

OAI_DL_IPERF = (
    277, 241, 325, 493, 482, 514, 524, 514, 440, 535,
    535, 566, 556, 556, 377, 409, 524, 482, 524, 451,
)

OAI_DL_XAPP = (
    257.6444141, 262.6076563, 321.0705, 501.7492031, 489.9303438,
    528.5274375, 531.4690547, 524.7904766, 449.6552422, 551.0009688,
    530.8338672, 576.9773047, 560.9096406, 568.7075313, 396.8537813,
    412.3383125, 525.6791406, 498.5655781, 533.0239063, 463.6264609,
)

SRS_UL_IPERF = (
    9.5, 10.8, 10.7, 9.34, 10.3, 10, 9.54, 10.8, 9.74, 9.63,
    10.3, 9.58, 10.1, 9.29, 10.7, 10, 10.1, 10.5, 9.85,
)

SRS_UL_XAPP = (
    10.62792969, 12.5234375, 11.68066406, 10.90625, 10.58398438,
    12.41113281, 10.45507813, 10.74707031, 11.05664063, 10.5625,
    10.74023438, 9.091796875, 12.62792969, 11.57226563, 10.53613281,
    13.12695313, 11.95507813, 11.28125, 11.36328125,
)

# name -> (application-layer series, xApp series)
SERIES = {
    "fig5a-dl": (OAI_DL_IPERF, OAI_DL_XAPP),
    "fig6b-ul": (SRS_UL_IPERF, SRS_UL_XAPP),
}
