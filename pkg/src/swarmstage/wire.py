"""Binary packet codec for the single-topic coordination traffic.

Every packet is a 5-byte header followed by at most 250 payload bytes.
Pose and velocity fields travel as little-endian fixed-point integers
(millimeters, mm/s, milliradians), which keeps a full state broadcast at
27 bytes on the wire. The exact layout, with worked byte dumps, is in
docs/WIRE_FORMAT.md.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .errors import (
    EncodeError,
    InvalidInputError,
    LengthMismatchError,
    MessageTypeError,
    ShortBufferError,
    VersionError,
)
from .kinematics import Pose

WIRE_VERSION = 1
HEADER_LEN = 5
MAX_PAYLOAD = 250

_HEADER = struct.Struct("<BBBH")           # version, msg_type, payload_len, sender
_GOSSIP = struct.Struct("<IIhhhhhhBB")     # seq, t_ms, x, y, z, vx, vy, yaw, prog, phase
_CMD_HEAD = struct.Struct("<HIB")          # issuer, seq, kind

GOSSIP_PAYLOAD_LEN = _GOSSIP.size          # 22
CMD_BASE_LEN = _CMD_HEAD.size              # 7


class MsgType(enum.IntEnum):
    GOSSIP = 1
    COMMAND = 2
    TRANSFER = 3


class Role(enum.Enum):
    ROBOT = "robot"
    MARKER = "marker"
    GROUND_STATION = "ground_station"


class CommandKind(enum.IntEnum):
    LAUNCH = 1
    SWITCH = 2
    STOP = 3
    MARKER_POSE = 4


# Wire packets carry no role byte; the message type and command kind pin
# the sender's role exactly, which is what makes decode(encode(m)) == m.
KIND_ROLE = {
    CommandKind.LAUNCH: Role.GROUND_STATION,
    CommandKind.SWITCH: Role.GROUND_STATION,
    CommandKind.STOP: Role.GROUND_STATION,
    CommandKind.MARKER_POSE: Role.MARKER,
}

_I16 = (-32768, 32767)
_U8 = (0, 255)
_U16 = (0, 65535)
_U32 = (0, 2**32 - 1)


def _check(name: str, value: int, lo_hi: tuple[int, int]) -> int:
    if not isinstance(value, int) or not lo_hi[0] <= value <= lo_hi[1]:
        raise InvalidInputError(f"{name}={value!r} outside {lo_hi}")
    return value


@dataclass(frozen=True)
class NodeId:
    id: int
    role: Role

    def __post_init__(self):
        _check("node id", self.id, _U16)


@dataclass(frozen=True)
class GossipMessage:
    """One robot's periodic state broadcast, already in fixed point."""

    sender: NodeId
    seq: int
    x_mm: int
    y_mm: int
    z_mm: int
    vx_mms: int
    vy_mms: int
    yaw_mrad: int
    program_id: int
    behavior_phase: int
    t_ms: int

    def __post_init__(self):
        _check("seq", self.seq, _U32)
        _check("t_ms", self.t_ms, _U32)
        for name in ("x_mm", "y_mm", "vx_mms", "vy_mms", "yaw_mrad"):
            _check(name, getattr(self, name), _I16)
        _check("z_mm", self.z_mm, (0, _I16[1]))
        _check("program_id", self.program_id, _U8)
        _check("behavior_phase", self.behavior_phase, _U8)

    @classmethod
    def from_state(cls, sender, seq, pose, vx, vy, program_id, behavior_phase, t):
        """Quantize a float state into the fixed-point wire fields."""
        return cls(
            sender=sender,
            seq=seq,
            x_mm=round(pose.x * 1000),
            y_mm=round(pose.y * 1000),
            z_mm=max(0, round(pose.z * 1000)),
            vx_mms=round(vx * 1000),
            vy_mms=round(vy * 1000),
            yaw_mrad=round(pose.yaw * 1000),
            program_id=program_id,
            behavior_phase=behavior_phase,
            t_ms=round(t * 1000),
        )

    @property
    def pose(self) -> Pose:
        return Pose(self.x_mm / 1000, self.y_mm / 1000, self.z_mm / 1000,
                    self.yaw_mrad / 1000)

    @property
    def velocity(self) -> tuple[float, float]:
        return self.vx_mms / 1000, self.vy_mms / 1000


@dataclass(frozen=True)
class CommandMessage:
    """Operator/marker command riding the same topic as the gossip."""

    kind: CommandKind
    issuer: NodeId
    seq: int
    program_id: Optional[int] = None  # Switch only
    x_mm: Optional[int] = None        # MarkerPose only
    y_mm: Optional[int] = None

    def __post_init__(self):
        _check("seq", self.seq, _U32)
        if self.kind is CommandKind.SWITCH:
            if self.program_id is None:
                raise InvalidInputError("switch command needs program_id")
            _check("program_id", self.program_id, _U8)
        elif self.program_id is not None:
            raise InvalidInputError(f"{self.kind.name} takes no program_id")
        if self.kind is CommandKind.MARKER_POSE:
            if self.x_mm is None or self.y_mm is None:
                raise InvalidInputError("marker pose command needs x_mm, y_mm")
            _check("x_mm", self.x_mm, _I16)
            _check("y_mm", self.y_mm, _I16)
        elif self.x_mm is not None or self.y_mm is not None:
            raise InvalidInputError(f"{self.kind.name} takes no coordinates")
        if self.issuer.role is not KIND_ROLE[self.kind]:
            raise InvalidInputError(
                f"{self.kind.name} must be issued by {KIND_ROLE[self.kind].value}"
            )

    @property
    def marker_xy(self) -> tuple[float, float]:
        if self.kind is not CommandKind.MARKER_POSE:
            raise InvalidInputError("not a marker pose command")
        return self.x_mm / 1000, self.y_mm / 1000


@dataclass(frozen=True)
class TransferChunk:
    """One slice of a bulk software/config upload (unicast stream)."""

    sender: NodeId
    data: bytes

    def __post_init__(self):
        if self.sender.role is not Role.GROUND_STATION:
            raise InvalidInputError("transfers originate from ground stations")
        if len(self.data) > MAX_PAYLOAD:
            raise InvalidInputError("chunk exceeds payload budget")


Message = Union[GossipMessage, CommandMessage, TransferChunk]


def encode(msg: Message) -> bytes:
    """Serialize a message; total length is always 5 + payload_len <= 255."""
    if isinstance(msg, GossipMessage):
        if msg.sender.role is not Role.ROBOT:
            raise EncodeError("gossip is only sent by robot nodes")
        payload = _GOSSIP.pack(
            msg.seq, msg.t_ms, msg.x_mm, msg.y_mm, msg.z_mm,
            msg.vx_mms, msg.vy_mms, msg.yaw_mrad,
            msg.program_id, msg.behavior_phase,
        )
        msg_type, sender = MsgType.GOSSIP, msg.sender.id
    elif isinstance(msg, CommandMessage):
        payload = _CMD_HEAD.pack(msg.issuer.id, msg.seq, int(msg.kind))
        if msg.kind is CommandKind.SWITCH:
            payload += struct.pack("<B", msg.program_id)
        elif msg.kind is CommandKind.MARKER_POSE:
            payload += struct.pack("<hh", msg.x_mm, msg.y_mm)
        msg_type, sender = MsgType.COMMAND, msg.issuer.id
    elif isinstance(msg, TransferChunk):
        payload = msg.data
        msg_type, sender = MsgType.TRANSFER, msg.sender.id
    else:
        raise EncodeError(f"cannot encode {type(msg).__name__}")

    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload {len(payload)} exceeds {MAX_PAYLOAD} bytes")
    return _HEADER.pack(WIRE_VERSION, int(msg_type), len(payload), sender) + payload


def decode(buf: bytes) -> Message:
    """Strict inverse of :func:`encode`; never truncates or guesses."""
    if len(buf) < HEADER_LEN:
        raise ShortBufferError(f"{len(buf)} bytes is shorter than the header")
    version, msg_type, payload_len, sender_id = _HEADER.unpack_from(buf)
    if version != WIRE_VERSION:
        raise VersionError(f"unsupported version {version}")
    if payload_len > MAX_PAYLOAD:
        raise LengthMismatchError(f"declared payload {payload_len} > {MAX_PAYLOAD}")
    if len(buf) != HEADER_LEN + payload_len:
        raise LengthMismatchError(
            f"buffer is {len(buf)} bytes, header declares {HEADER_LEN + payload_len}"
        )
    payload = buf[HEADER_LEN:]

    try:
        if msg_type == MsgType.GOSSIP:
            if payload_len != GOSSIP_PAYLOAD_LEN:
                raise LengthMismatchError(
                    f"gossip payload must be {GOSSIP_PAYLOAD_LEN} bytes, got {payload_len}"
                )
            seq, t_ms, x, y, z, vx, vy, yaw, prog, phase = _GOSSIP.unpack(payload)
            return GossipMessage(
                NodeId(sender_id, Role.ROBOT), seq, x, y, z, vx, vy, yaw,
                prog, phase, t_ms,
            )
        if msg_type == MsgType.COMMAND:
            if payload_len < CMD_BASE_LEN:
                raise LengthMismatchError("command payload shorter than base fields")
            issuer_id, seq, kind_byte = _CMD_HEAD.unpack_from(payload)
            try:
                kind = CommandKind(kind_byte)
            except ValueError:
                raise MessageTypeError(f"unknown command kind {kind_byte}") from None
            rest = payload[CMD_BASE_LEN:]
            issuer = NodeId(issuer_id, KIND_ROLE[kind])
            if kind is CommandKind.SWITCH:
                if len(rest) != 1:
                    raise LengthMismatchError("switch payload must be 8 bytes")
                return CommandMessage(kind, issuer, seq, program_id=rest[0])
            if kind is CommandKind.MARKER_POSE:
                if len(rest) != 4:
                    raise LengthMismatchError("marker pose payload must be 11 bytes")
                x, y = struct.unpack("<hh", rest)
                return CommandMessage(kind, issuer, seq, x_mm=x, y_mm=y)
            if rest:
                raise LengthMismatchError(f"{kind.name} payload must be 7 bytes")
            return CommandMessage(kind, issuer, seq)
        if msg_type == MsgType.TRANSFER:
            return TransferChunk(NodeId(sender_id, Role.GROUND_STATION), payload)
    except InvalidInputError as e:
        raise LengthMismatchError(f"field out of range: {e}") from e
    raise MessageTypeError(f"unknown msg_type {msg_type}")


def peek_msg_type(buf: bytes) -> MsgType:
    """Message type from the header without a full parse (for accounting)."""
    if len(buf) < HEADER_LEN:
        raise ShortBufferError("buffer shorter than header")
    try:
        return MsgType(buf[1])
    except ValueError:
        raise MessageTypeError(f"unknown msg_type {buf[1]}") from None


def quantize_yaw_mrad(yaw: float) -> int:
    return round(yaw * 1000)


def wire_length(msg: Message) -> int:
    return len(encode(msg))


assert GOSSIP_PAYLOAD_LEN == 22
assert CMD_BASE_LEN == 7
