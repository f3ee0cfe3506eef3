"""Shared domain types: process ids, ballots, commands, messages, and quorum arithmetic.

Everything here is an immutable value.  Ballots order lexicographically by
(round, leader id); process ids order by (role rank, index) so that ballot
comparison is total.  Messages are named tuples with a registered wire tag
and a canonical single-line JSON encoding used by traces and the socket
transport.
"""

from __future__ import annotations

import base64
import enum
import json
from typing import NamedTuple, Optional, Union


class ConfigError(ValueError):
    """Invalid configuration value (bad counts, empty leader sets, ...)."""


class Role(enum.IntEnum):
    # The rank fixes a deterministic total order on process ids; any fixed
    # order works, so processes of the same role are ordered by index and
    # roles by this rank.
    PROPOSER = 0
    ACCEPTOR = 1
    LEARNER = 2
    REPLICA = 3
    LEADER = 4
    CLIENT = 5
    MERGED = 6


_ROLE_BY_NAME = {r.name.lower(): r for r in Role}


class ProcessId(NamedTuple):
    role: Role
    index: int

    def __str__(self) -> str:
        return f"{self.role.name.lower()}:{self.index}"


def pid(role: Union[Role, str], index: int) -> ProcessId:
    if isinstance(role, str):
        try:
            role = _ROLE_BY_NAME[role]
        except KeyError:
            raise ConfigError(f"unknown role {role!r}") from None
    if index < 0:
        raise ConfigError(f"process index must be non-negative, got {index}")
    return ProcessId(role, index)


class Ballot(NamedTuple):
    round: int
    leader: ProcessId

    def __str__(self) -> str:
        return f"({self.round},{self.leader})"


def ballot_less(a: Ballot, b: Ballot) -> bool:
    """Strict lexicographic order on (round, leader)."""
    return a < b


def quorum_size(n_acceptors: int) -> int:
    """Smallest k with k > n_acceptors / 2."""
    if n_acceptors < 1:
        raise ConfigError("need at least one acceptor")
    return n_acceptors // 2 + 1


APP_OP = "app_op"
RECONFIG = "reconfig"


class Operation(NamedTuple):
    kind: str
    payload: Union[bytes, frozenset]  # opaque bytes, or a frozenset of leader ids


def app_op(payload: Union[bytes, str]) -> Operation:
    if isinstance(payload, str):
        payload = payload.encode()
    return Operation(APP_OP, payload)


def reconfig_op(leaders) -> Operation:
    leaders = frozenset(leaders)
    if not leaders:
        raise ConfigError("reconfiguration needs a non-empty leader set")
    for p in leaders:
        if not isinstance(p, ProcessId) or p.role is not Role.LEADER:
            raise ConfigError(f"reconfiguration target {p} is not a leader")
    return Operation(RECONFIG, leaders)


def is_reconfig(op: Operation) -> bool:
    return op.kind == RECONFIG


class Command(NamedTuple):
    client: ProcessId
    cmd_id: int
    op: Operation


class PValue(NamedTuple):
    ballot: Ballot
    slot: int
    command: Command


# --- messages -------------------------------------------------------------

# Single-value protocol (one round of prepare/promise then accept/accepted).
class Prepare(NamedTuple):
    ballot: Ballot


class Respond(NamedTuple):
    ballot: Ballot
    max_prop: Optional[tuple]  # (Ballot, value) of the highest accepted proposal, if any


class Accept(NamedTuple):
    ballot: Ballot
    value: int


class Accepted(NamedTuple):
    ballot: Ballot
    value: int


# Multi-value protocol.
class Request(NamedTuple):
    command: Command


class Response(NamedTuple):
    cmd_id: int
    result: str


class Propose(NamedTuple):
    slot: int
    command: Command


class Decision(NamedTuple):
    slot: int
    command: Command


class Phase1a(NamedTuple):
    ballot: Ballot


class Phase1b(NamedTuple):
    ballot: Ballot
    accepted: frozenset  # of PValue


class Phase2a(NamedTuple):
    ballot: Ballot
    slot: int
    command: Command


class Phase2b(NamedTuple):
    ballot: Ballot
    slot: int
    command: Command


class Preempt(NamedTuple):
    ballot: Ballot


class Ping(NamedTuple):
    round: int
    stamp: int


class Pong(NamedTuple):
    round: int
    stamp: int


Message = Union[
    Prepare, Respond, Accept, Accepted,
    Request, Response, Propose, Decision,
    Phase1a, Phase1b, Phase2a, Phase2b, Preempt, Ping, Pong,
]

MESSAGE_TYPES = {
    "prepare": Prepare,
    "respond": Respond,
    "accept": Accept,
    "accepted": Accepted,
    "request": Request,
    "response": Response,
    "propose": Propose,
    "decision": Decision,
    "1a": Phase1a,
    "1b": Phase1b,
    "2a": Phase2a,
    "2b": Phase2b,
    "preempt": Preempt,
    "ping": Ping,
    "pong": Pong,
}

TAG_OF = {cls: tag for tag, cls in MESSAGE_TYPES.items()}

# Codec name per field, used by the wire encoder/decoder below.
_FIELD_CODECS = {
    Prepare: ("ballot",),
    Respond: ("ballot", "max_prop"),
    Accept: ("ballot", "int"),
    Accepted: ("ballot", "int"),
    Request: ("command",),
    Response: ("int", "str"),
    Propose: ("int", "command"),
    Decision: ("int", "command"),
    Phase1a: ("ballot",),
    Phase1b: ("ballot", "pvalue_set"),
    Phase2a: ("ballot", "int", "command"),
    Phase2b: ("ballot", "int", "command"),
    Preempt: ("ballot",),
    Ping: ("int", "int"),
    Pong: ("int", "int"),
}


def tag_of(msg: Message) -> str:
    return TAG_OF[type(msg)]


def sort_key(value):
    """Canonical comparison key for any domain value.

    Used to order set-valued fields (accepted sets, leader sets) before
    encoding, so that byte output never depends on hash ordering.
    """
    if isinstance(value, ProcessId):
        return (int(value.role), value.index)
    if isinstance(value, Ballot):
        return (value.round, sort_key(value.leader))
    if isinstance(value, Operation):
        if is_reconfig(value):
            return (1, tuple(sorted(sort_key(p) for p in value.payload)))
        return (0, value.payload)
    if isinstance(value, Command):
        return (sort_key(value.client), value.cmd_id, sort_key(value.op))
    if isinstance(value, PValue):
        return (sort_key(value.ballot), value.slot, sort_key(value.command))
    return value


# --- wire encoding ---------------------------------------------------------
# Canonical form: {"tag": <string>, "fields": {...}} on a single line, with
# ballots as [round, [role, index]] arrays and set-valued fields sorted.

def _enc_pid(p: ProcessId) -> list:
    return [p.role.name.lower(), p.index]


def _dec_pid(v) -> ProcessId:
    return pid(v[0], v[1])


def _enc_ballot(b: Ballot) -> list:
    return [b.round, _enc_pid(b.leader)]


def _dec_ballot(v) -> Ballot:
    return Ballot(v[0], _dec_pid(v[1]))


def _enc_op(op: Operation) -> dict:
    if is_reconfig(op):
        leaders = sorted(op.payload, key=sort_key)
        return {"kind": RECONFIG, "leaders": [_enc_pid(p) for p in leaders]}
    return {"kind": APP_OP, "payload": base64.b64encode(op.payload).decode("ascii")}


def _dec_op(v) -> Operation:
    if v["kind"] == RECONFIG:
        return reconfig_op(_dec_pid(p) for p in v["leaders"])
    return Operation(APP_OP, base64.b64decode(v["payload"]))


def _enc_command(c: Command) -> dict:
    return {"client": _enc_pid(c.client), "cmd_id": c.cmd_id, "op": _enc_op(c.op)}


def _dec_command(v) -> Command:
    return Command(_dec_pid(v["client"]), v["cmd_id"], _dec_op(v["op"]))


def _enc_pvalue(pv: PValue) -> list:
    return [_enc_ballot(pv.ballot), pv.slot, _enc_command(pv.command)]


def _dec_pvalue(v) -> PValue:
    return PValue(_dec_ballot(v[0]), v[1], _dec_command(v[2]))


_ENCODERS = {
    "int": lambda v: v,
    "str": lambda v: v,
    "ballot": _enc_ballot,
    "command": _enc_command,
    "pvalue_set": lambda s: [_enc_pvalue(pv) for pv in sorted(s, key=sort_key)],
    "max_prop": lambda v: None if v is None else [_enc_ballot(v[0]), v[1]],
}

_DECODERS = {
    "int": lambda v: v,
    "str": lambda v: v,
    "ballot": _dec_ballot,
    "command": _dec_command,
    "pvalue_set": lambda v: frozenset(_dec_pvalue(x) for x in v),
    "max_prop": lambda v: None if v is None else (_dec_ballot(v[0]), v[1]),
}


def encode_message(msg: Message) -> dict:
    cls = type(msg)
    codecs = _FIELD_CODECS[cls]
    fields = {
        name: _ENCODERS[codec](value)
        for name, codec, value in zip(cls._fields, codecs, msg)
    }
    return {"tag": TAG_OF[cls], "fields": fields}


def decode_message(obj: dict) -> Message:
    cls = MESSAGE_TYPES[obj["tag"]]
    codecs = _FIELD_CODECS[cls]
    fields = obj["fields"]
    return cls(*(_DECODERS[codec](fields[name]) for name, codec in zip(cls._fields, codecs)))


def message_to_json(msg: Message) -> str:
    return json.dumps(encode_message(msg), sort_keys=True, separators=(",", ":"))


def message_from_json(line: str) -> Message:
    return decode_message(json.loads(line))
