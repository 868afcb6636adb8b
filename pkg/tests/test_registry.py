import pytest
from hypothesis import given
from hypothesis import strategies as st

from e2stack import kpm
from e2stack.registry import (
    OPAQUE,
    ConflictError,
    Opaque,
    RegistryError,
    SmCodecKey,
    SmRegistry,
    default_registry,
)

KPM3 = SmCodecKey("KPM", "3.00")
KPM2 = SmCodecKey("KPM", "2.03")


def test_register_then_resolve():
    codec = kpm.KpmCodec()
    reg = SmRegistry().register(KPM3, codec)
    assert reg.resolve(KPM3) is codec
    assert KPM3 in reg
    assert str(KPM3) == "KPM/3.00"


def test_duplicate_registration_conflicts():
    reg = SmRegistry().register(KPM3, kpm.KpmCodec())
    with pytest.raises(ConflictError):
        reg.register(KPM3, kpm.KpmCodec())


def test_two_versions_resolve_independently():
    v2, v3 = kpm.KpmCodec("KPM", "2.03"), kpm.KpmCodec()
    reg = SmRegistry().register(KPM2, v2).register(KPM3, v3)
    assert sorted(reg.keys(), key=str) == [KPM2, KPM3]
    assert reg.resolve(KPM2) is v2 and reg.resolve(KPM3) is v3
    reg.unregister(KPM2)
    assert reg.resolve_for_function({1: KPM2, 2: KPM3}, 1) is OPAQUE
    assert reg.resolve_for_function({1: KPM2, 2: KPM3}, 2) is v3


def test_replace_models_a_version_swap():
    reg = default_registry()
    newer = kpm.KpmCodec()
    reg.replace(KPM3, newer)
    assert reg.resolve_for_function({147: KPM3}, 147) is newer


def test_bound_and_unbound_functions():
    reg = default_registry()
    assert isinstance(reg.resolve_for_function({147: KPM3}, 147), kpm.KpmCodec)
    assert reg.resolve_for_function({147: KPM3}, 9) is OPAQUE


@given(st.binary(max_size=100))
def test_fallback_preserves_octets(blob):
    for decode in (OPAQUE.decode_indication_header, OPAQUE.decode_indication_message,
                   OPAQUE.decode_function_definition):
        out = decode(blob)
        assert isinstance(out, Opaque)
        assert out.octets == blob
        assert out.tag == "undecoded"
        assert bytes.fromhex(out.hex) == blob
    assert OPAQUE.summary(OPAQUE.decode_function_definition(blob)) is None
    assert OPAQUE.encode_action_definition(Opaque(blob)) == blob


def test_fallback_cannot_encode_structured_values():
    with pytest.raises(RegistryError):
        OPAQUE.encode_event_trigger(kpm.EventTriggerDefinition(1000))
