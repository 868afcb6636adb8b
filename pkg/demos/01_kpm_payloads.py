"""
KPM payloads at the bit level
=============================

Encode the pieces of a subscription, look at the octets, decode them back.
"""

# %%
from e2stack import kpm
from e2stack.per import to_hex

trigger = kpm.EventTriggerDefinition(reporting_period_ms=1000)
print("event trigger:", to_hex(kpm.encode_event_trigger(trigger)))

# %%
# The period is stored as an offset from 1 in 16 bits, so 1000 becomes 999.
assert kpm.encode_event_trigger(trigger) == bytes([0x03, 0xE7])

# %%
action = kpm.ActionDefinition(style_id=3, metrics=["DRB.UEThpDl", "DRB.PdcpSduVolumeDL"],
                              granularity_period_ms=250)
octets = kpm.encode_action_definition(action)
print(f"action definition: {len(octets)} octets  {to_hex(octets)}")
print(kpm.decode_action_definition(octets))

# %%
# What a node advertises at setup, as the xApp sees it after decoding.
definition = kpm.reference_function_definition()
for style, metrics in kpm.function_definition_summary(definition).items():
    print(style, metrics or "-")

# %%
message = kpm.PerUeMessage([
    kpm.UeReport("ue1", [kpm.MeasRecord([1234.5, 154312]), kpm.MeasRecord([None, 0])]),
])
raw = kpm.encode_indication_message(message)
print("indication message:", to_hex(raw))
assert kpm.decode_indication_message(raw) == message
