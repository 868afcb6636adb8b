"""Service-model codec registry.

Codecs are registered under ``(sm_name, version)``.  E2 nodes announce, per
RAN function id, which service model they speak; ``resolve_for_function``
turns that binding into a codec, falling back to :class:`OpaqueFallback`
when nothing suitable is registered so callers still get the raw payload.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Mapping, Protocol

from .per import to_hex


class RegistryError(Exception):
    pass


class ConflictError(RegistryError):
    pass


@dataclass(frozen=True)
class SmCodecKey:
    sm_name: str
    version: str

    def __str__(self):
        return f"{self.sm_name}/{self.version}"


class SmCodec(Protocol):
    def decode_function_definition(self, data: bytes) -> Any: ...
    def summary(self, definition: Any) -> dict[int, list[str]]: ...
    def encode_event_trigger(self, trigger: Any) -> bytes: ...
    def encode_action_definition(self, action: Any) -> bytes: ...
    def decode_action_definition(self, data: bytes) -> Any: ...
    def decode_indication_header(self, data: bytes) -> Any: ...
    def decode_indication_message(self, data: bytes) -> Any: ...


@dataclass(frozen=True)
class Opaque:
    """A payload nobody could decode.  ``octets`` are never modified."""

    octets: bytes

    @property
    def hex(self) -> str:
        return to_hex(self.octets)

    tag = "undecoded"


class OpaqueFallback:
    """Stand-in codec used when no registered codec matches a RAN function."""

    key = None

    def _wrap(self, data: bytes) -> Opaque:
        return Opaque(bytes(data))

    decode_function_definition = _wrap
    decode_action_definition = _wrap
    decode_indication_header = _wrap
    decode_indication_message = _wrap
    decode_event_trigger = _wrap

    def summary(self, definition):
        return None

    def encode_event_trigger(self, trigger):
        if isinstance(trigger, Opaque):
            return trigger.octets
        raise RegistryError("no codec bound: cannot encode event trigger")

    def encode_action_definition(self, action):
        if isinstance(action, Opaque):
            return action.octets
        raise RegistryError("no codec bound: cannot encode action definition")

    def __repr__(self):
        return "OpaqueFallback()"


OPAQUE = OpaqueFallback()


class SmRegistry:
    def __init__(self):
        self._codecs: dict[SmCodecKey, SmCodec] = {}
        self._lock = threading.Lock()

    def register(self, key: SmCodecKey, codec: SmCodec) -> "SmRegistry":
        with self._lock:
            if key in self._codecs:
                raise ConflictError(f"codec {key} already registered")
            self._codecs[key] = codec
        return self

    def unregister(self, key: SmCodecKey) -> None:
        with self._lock:
            self._codecs.pop(key, None)

    def replace(self, key: SmCodecKey, codec: SmCodec) -> None:
        with self._lock:
            self._codecs[key] = codec

    def resolve(self, key: SmCodecKey) -> SmCodec | None:
        return self._codecs.get(key)

    def keys(self) -> list[SmCodecKey]:
        return list(self._codecs)

    def __contains__(self, key) -> bool:
        return key in self._codecs

    def resolve_for_function(self, bindings: Mapping[int, SmCodecKey],
                             ran_function_id: int) -> SmCodec:
        key = bindings.get(ran_function_id)
        if key is None:
            return OPAQUE
        return self._codecs.get(key, OPAQUE)


def default_registry() -> SmRegistry:
    from .kpm import KpmCodec, SM_NAME, SM_VERSION

    return SmRegistry().register(SmCodecKey(SM_NAME, SM_VERSION), KpmCodec())
