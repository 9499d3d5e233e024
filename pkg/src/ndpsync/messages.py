"""Wire message format shared by every synchronization request.

A message is 18 bytes:

    bytes 0..7    address of the synchronization variable, little-endian
    byte  8       opcode, low 6 bits (high 2 bits reserved, must be zero)
    byte  9       core id, low 6 bits (high 2 bits reserved, must be zero)
    bytes 10..17  64-bit info field, little-endian

The core id is the sender's local index within its unit; overflow
messages (and requests sent across units under flat/central routing)
pack {unit id, local core id} into the same 6 bits. The info field
carries the per-primitive argument: barrier participant count, semaphore
initial resources, the lock address associated with a condition-variable
wait; grant-direction messages carry counts where a handler defines them
and zero otherwise.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

MESSAGE_BYTES = 18

_U64 = struct.Struct("<Q")


class CodecError(ValueError):
    """Malformed wire message."""


class Opcode(enum.IntEnum):
    # locks
    LOCK_ACQUIRE_GLOBAL = 0
    LOCK_ACQUIRE_LOCAL = 1
    LOCK_RELEASE_GLOBAL = 2
    LOCK_RELEASE_LOCAL = 3
    LOCK_GRANT_GLOBAL = 4
    LOCK_GRANT_LOCAL = 5
    LOCK_ACQUIRE_OVERFLOW = 6
    LOCK_RELEASE_OVERFLOW = 7
    LOCK_GRANT_OVERFLOW = 8
    # barriers
    BARRIER_WAIT_GLOBAL = 9
    BARRIER_WAIT_LOCAL_WITHIN_UNIT = 10
    BARRIER_WAIT_LOCAL_ACROSS_UNITS = 11
    BARRIER_DEPART_GLOBAL = 12
    BARRIER_DEPART_LOCAL = 13
    BARRIER_WAIT_OVERFLOW = 14
    BARRIER_DEPARTURE_OVERFLOW = 15
    # semaphores
    SEM_WAIT_GLOBAL = 16
    SEM_WAIT_LOCAL = 17
    SEM_GRANT_GLOBAL = 18
    SEM_GRANT_LOCAL = 19
    SEM_POST_GLOBAL = 20
    SEM_POST_LOCAL = 21
    SEM_WAIT_OVERFLOW = 22
    SEM_GRANT_OVERFLOW = 23
    SEM_POST_OVERFLOW = 24
    # condition variables
    COND_WAIT_GLOBAL = 25
    COND_WAIT_LOCAL = 26
    COND_SIGNAL_GLOBAL = 27
    COND_SIGNAL_LOCAL = 28
    COND_BROAD_GLOBAL = 29
    COND_BROAD_LOCAL = 30
    COND_GRANT_GLOBAL = 31
    COND_GRANT_LOCAL = 32
    COND_WAIT_OVERFLOW = 33
    COND_SIGNAL_OVERFLOW = 34
    COND_BROAD_OVERFLOW = 35
    COND_GRANT_OVERFLOW = 36
    # counter maintenance
    DECREASE_INDEXING_COUNTER = 37


assert len(Opcode) == 38


class OpClass(enum.Enum):
    ACQUIRE = "acquire"
    RELEASE = "release"
    GRANT = "grant"
    DEPART = "depart"
    OVERFLOW_ACQUIRE = "overflow_acquire"
    OVERFLOW_RELEASE = "overflow_release"
    OVERFLOW_GRANT = "overflow_grant"
    CONTROL = "control"


_CLASS = {
    Opcode.LOCK_ACQUIRE_GLOBAL: OpClass.ACQUIRE,
    Opcode.LOCK_ACQUIRE_LOCAL: OpClass.ACQUIRE,
    Opcode.BARRIER_WAIT_GLOBAL: OpClass.ACQUIRE,
    Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT: OpClass.ACQUIRE,
    Opcode.BARRIER_WAIT_LOCAL_ACROSS_UNITS: OpClass.ACQUIRE,
    Opcode.SEM_WAIT_GLOBAL: OpClass.ACQUIRE,
    Opcode.SEM_WAIT_LOCAL: OpClass.ACQUIRE,
    Opcode.COND_WAIT_GLOBAL: OpClass.ACQUIRE,
    Opcode.COND_WAIT_LOCAL: OpClass.ACQUIRE,

    Opcode.LOCK_RELEASE_GLOBAL: OpClass.RELEASE,
    Opcode.LOCK_RELEASE_LOCAL: OpClass.RELEASE,
    Opcode.SEM_POST_GLOBAL: OpClass.RELEASE,
    Opcode.SEM_POST_LOCAL: OpClass.RELEASE,
    # signal/broadcast never block the caller: release-type.
    Opcode.COND_SIGNAL_GLOBAL: OpClass.RELEASE,
    Opcode.COND_SIGNAL_LOCAL: OpClass.RELEASE,
    Opcode.COND_BROAD_GLOBAL: OpClass.RELEASE,
    Opcode.COND_BROAD_LOCAL: OpClass.RELEASE,

    Opcode.LOCK_GRANT_GLOBAL: OpClass.GRANT,
    Opcode.LOCK_GRANT_LOCAL: OpClass.GRANT,
    Opcode.SEM_GRANT_GLOBAL: OpClass.GRANT,
    Opcode.SEM_GRANT_LOCAL: OpClass.GRANT,
    Opcode.COND_GRANT_GLOBAL: OpClass.GRANT,
    Opcode.COND_GRANT_LOCAL: OpClass.GRANT,

    Opcode.BARRIER_DEPART_GLOBAL: OpClass.DEPART,
    Opcode.BARRIER_DEPART_LOCAL: OpClass.DEPART,

    Opcode.LOCK_ACQUIRE_OVERFLOW: OpClass.OVERFLOW_ACQUIRE,
    Opcode.BARRIER_WAIT_OVERFLOW: OpClass.OVERFLOW_ACQUIRE,
    Opcode.SEM_WAIT_OVERFLOW: OpClass.OVERFLOW_ACQUIRE,
    Opcode.COND_WAIT_OVERFLOW: OpClass.OVERFLOW_ACQUIRE,

    Opcode.LOCK_RELEASE_OVERFLOW: OpClass.OVERFLOW_RELEASE,
    Opcode.SEM_POST_OVERFLOW: OpClass.OVERFLOW_RELEASE,
    Opcode.COND_SIGNAL_OVERFLOW: OpClass.OVERFLOW_RELEASE,
    Opcode.COND_BROAD_OVERFLOW: OpClass.OVERFLOW_RELEASE,

    # wake-direction overflow messages, barrier departure included
    Opcode.LOCK_GRANT_OVERFLOW: OpClass.OVERFLOW_GRANT,
    Opcode.SEM_GRANT_OVERFLOW: OpClass.OVERFLOW_GRANT,
    Opcode.COND_GRANT_OVERFLOW: OpClass.OVERFLOW_GRANT,
    Opcode.BARRIER_DEPARTURE_OVERFLOW: OpClass.OVERFLOW_GRANT,

    Opcode.DECREASE_INDEXING_COUNTER: OpClass.CONTROL,
}

assert len(_CLASS) == len(Opcode)


def classify_opcode(op: Opcode) -> OpClass:
    """Total mapping of opcode to semantic class."""
    return _CLASS[op]


@dataclass(frozen=True)
class Message:
    addr: int
    opcode: Opcode
    core_id: int
    info: int = 0


def encode(m: Message) -> bytes:
    """Serialize to the 18-byte wire format; rejects out-of-range fields."""
    if not 0 <= m.addr < 1 << 64:
        raise CodecError(f"addr {m.addr} does not fit in 64 bits")
    if not 0 <= m.core_id < 64:
        raise CodecError(f"core_id {m.core_id} does not fit in 6 bits")
    if not 0 <= m.info < 1 << 64:
        raise CodecError(f"info {m.info} does not fit in 64 bits")
    op = Opcode(m.opcode)
    return _U64.pack(m.addr) + bytes((int(op), m.core_id)) + _U64.pack(m.info)


def decode(raw: bytes) -> Message:
    """Parse an 18-byte wire message; raises CodecError on any malformation."""
    if len(raw) != MESSAGE_BYTES:
        raise CodecError(f"expected {MESSAGE_BYTES} bytes, got {len(raw)}")
    addr = _U64.unpack_from(raw, 0)[0]
    op_byte, core_byte = raw[8], raw[9]
    if op_byte & 0xC0:
        raise CodecError(f"reserved opcode bits set: {op_byte:#04x}")
    if core_byte & 0xC0:
        raise CodecError(f"reserved core id bits set: {core_byte:#04x}")
    if op_byte >= len(Opcode):
        raise CodecError(f"unknown opcode {op_byte}")
    info = _U64.unpack_from(raw, 10)[0]
    return Message(addr=addr, opcode=Opcode(op_byte), core_id=core_byte, info=info)


def pack_core(unit: int, local: int, core_bits: int) -> int:
    """Pack {unit, local core} into the 6-bit core id field."""
    packed = (unit << core_bits) | local
    if packed >= 64:
        raise CodecError(f"packed core id {packed} does not fit in 6 bits")
    return packed


def unpack_core(packed: int, core_bits: int) -> tuple[int, int]:
    return packed >> core_bits, packed & ((1 << core_bits) - 1)
