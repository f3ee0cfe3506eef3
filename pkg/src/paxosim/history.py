"""Append-only sent/received message histories and the queries guards run over them.

Every protocol condition is a query against what a process has sent or
received: existence of a matching message, a universal check, a distinct
sender count, a maximum over some field, or a selection.  HistoryLog keeps
entries per message tag and lazily builds small incremental indexes for the
query shapes in use.  Indexes are pure caches: query results are a function
of the multiset of entries only, and the test suite cross-checks every
query kind against a full-scan oracle.
"""

from __future__ import annotations

import json
import logging
from typing import Iterable, Optional

from .core import Message, ProcessId, encode_message, tag_of

log = logging.getLogger(__name__)

# Pseudo field position addressing the entry's peer (sender or destination),
# usable in constraints alongside real message field positions.
PEER = -1


def _norm(consts: Optional[dict]) -> tuple:
    if not consts:
        return ()
    return tuple(sorted(consts.items()))


class HistoryLog:
    """One direction (sent or received) of a process's message history."""

    __slots__ = ("_all", "_by_tag", "_eq", "_peers", "_max", "_group_max", "_watch")

    def __init__(self):
        self._all = []            # [(tag, fields, peer)] in append order
        self._by_tag = {}         # tag -> [(fields, peer)]
        self._eq = {}             # (tag, positions) -> {key: [(fields, peer)]}
        self._peers = {}          # (tag, positions) -> {key: {peer: None}}
        self._max = {}            # (tag, positions, vpos) -> {key: (value, fields, peer)}
        self._group_max = {}      # (tag, positions, gpos, vpos) -> {key: {group: (fields, peer)}}
        self._watch = {}          # tag -> [updater(fields, peer)]

    def __len__(self):
        return len(self._all)

    def append(self, tag: str, fields: tuple, peer: ProcessId) -> None:
        self._all.append((tag, fields, peer))
        self._by_tag.setdefault(tag, []).append((fields, peer))
        for update in self._watch.get(tag, ()):
            update(fields, peer)

    def records(self) -> list:
        """All (tag, fields, peer) entries in append order."""
        return self._all

    def entries(self, tag: str) -> list:
        return self._by_tag.get(tag, [])

    # -- index plumbing ------------------------------------------------

    def _register(self, tag: str, update) -> None:
        self._watch.setdefault(tag, []).append(update)
        for fields, peer in self._by_tag.get(tag, []):
            update(fields, peer)

    @staticmethod
    def _key(positions: tuple, fields: tuple, peer: ProcessId) -> tuple:
        return tuple(peer if p == PEER else fields[p] for p in positions)

    def _eq_index(self, tag: str, positions: tuple) -> dict:
        idx = self._eq.get((tag, positions))
        if idx is None:
            idx = self._eq[(tag, positions)] = {}

            def update(fields, peer, idx=idx, positions=positions):
                idx.setdefault(self._key(positions, fields, peer), []).append((fields, peer))

            self._register(tag, update)
        return idx

    def _peer_index(self, tag: str, positions: tuple) -> dict:
        idx = self._peers.get((tag, positions))
        if idx is None:
            idx = self._peers[(tag, positions)] = {}

            def update(fields, peer, idx=idx, positions=positions):
                idx.setdefault(self._key(positions, fields, peer), {})[peer] = None

            self._register(tag, update)
        return idx

    def _max_index(self, tag: str, positions: tuple, vpos: int) -> dict:
        idx = self._max.get((tag, positions, vpos))
        if idx is None:
            idx = self._max[(tag, positions, vpos)] = {}

            def update(fields, peer, idx=idx, positions=positions, vpos=vpos):
                key = self._key(positions, fields, peer)
                value = fields[vpos]
                cur = idx.get(key)
                if cur is None or value > cur[0]:
                    idx[key] = (value, fields, peer)

            self._register(tag, update)
        return idx

    def _group_max_index(self, tag: str, positions: tuple, gpos: int, vpos: int) -> dict:
        idx = self._group_max.get((tag, positions, gpos, vpos))
        if idx is None:
            idx = self._group_max[(tag, positions, gpos, vpos)] = {}

            def update(fields, peer, idx=idx, positions=positions, gpos=gpos, vpos=vpos):
                key = self._key(positions, fields, peer)
                groups = idx.setdefault(key, {})
                cur = groups.get(fields[gpos])
                if cur is None or fields[vpos] > cur[0][vpos]:
                    groups[fields[gpos]] = (fields, peer)

            self._register(tag, update)
        return idx

    # -- queries --------------------------------------------------------

    def matches(self, tag: str, consts: Optional[dict] = None) -> list:
        """All (fields, peer) entries of `tag` whose constrained positions equal
        the given constants, in append order."""
        norm = _norm(consts)
        if not norm:
            return self._by_tag.get(tag, [])
        positions = tuple(p for p, _ in norm)
        key = tuple(v for _, v in norm)
        return self._eq_index(tag, positions).get(key, [])

    def exists(self, tag: str, consts: Optional[dict] = None) -> bool:
        return bool(self.matches(tag, consts))

    def count_peers(self, tag: str, consts: Optional[dict] = None) -> int:
        """Number of distinct peers over matching entries."""
        norm = _norm(consts)
        positions = tuple(p for p, _ in norm)
        key = tuple(v for _, v in norm)
        return len(self._peer_index(tag, positions).get(key, ()))

    def peers(self, tag: str, consts: Optional[dict] = None) -> list:
        """Distinct peers over matching entries, in first-seen order."""
        norm = _norm(consts)
        positions = tuple(p for p, _ in norm)
        key = tuple(v for _, v in norm)
        return list(self._peer_index(tag, positions).get(key, ()))

    def peer_groups(self, tag: str, group_positions: tuple) -> dict:
        """Map from projected group key to the dict of distinct peers."""
        return self._peer_index(tag, tuple(group_positions))

    def max_value(self, tag: str, vpos: int, consts: Optional[dict] = None):
        """Maximum of field `vpos` over matching entries, or None when empty.

        None is the distinguished "nothing matched" value; callers guard on it
        rather than catching an exception.
        """
        entry = self.max_entry(tag, vpos, consts)
        return None if entry is None else entry[0][vpos]

    def max_entry(self, tag: str, vpos: int, consts: Optional[dict] = None):
        """The (fields, peer) entry maximizing field `vpos`, or None."""
        norm = _norm(consts)
        positions = tuple(p for p, _ in norm)
        key = tuple(v for _, v in norm)
        found = self._max_index(tag, positions, vpos).get(key)
        return None if found is None else (found[1], found[2])

    def group_max(self, tag: str, gpos: int, vpos: int, consts: Optional[dict] = None) -> dict:
        """Per value of field `gpos`, the entry with maximum field `vpos`."""
        norm = _norm(consts)
        positions = tuple(p for p, _ in norm)
        key = tuple(v for _, v in norm)
        idx = self._group_max_index(tag, positions, gpos, vpos)
        return idx.get(key, {})

    def forall(self, tag: str, cond, consts: Optional[dict] = None) -> bool:
        """True iff cond(fields, peer) holds for every match (vacuously true)."""
        return all(cond(fields, peer) for fields, peer in self.matches(tag, consts))


class MessageHistory:
    """Sent and received logs of a single process.

    Entries are only ever appended: `record_sent` at each send (one entry per
    destination) and `record_received` when the harness dispatches a delivery.
    """

    __slots__ = ("sent", "received")

    def __init__(self):
        self.sent = HistoryLog()
        self.received = HistoryLog()

    def record_sent(self, msg: Message, dests: Iterable[ProcessId]) -> None:
        dests = list(dests)
        if not dests:
            log.warning("message %s sent to an empty destination set", tag_of(msg))
            return
        tag = tag_of(msg)
        fields = tuple(msg)
        for d in dests:
            self.sent.append(tag, fields, d)

    def record_received(self, msg: Message, sender: ProcessId) -> None:
        self.received.append(tag_of(msg), tuple(msg), sender)

    # -- generic query entry point --------------------------------------
    # The protocol code calls the typed HistoryLog methods directly; this
    # dispatcher exposes the same engine uniformly for tools and tests.

    def query(self, direction: str, kind: str, tag: str,
              consts: Optional[dict] = None, project=None, cond=None, rng=None):
        log_ = self.sent if direction == "sent" else self.received
        if kind == "exists":
            found = log_.matches(tag, consts)
            if not found:
                return (False, None)
            witness = rng.choice(found) if rng is not None else found[0]
            return (True, witness)
        if kind == "forall":
            return log_.forall(tag, cond or (lambda f, p: True), consts)
        if kind == "count":
            if project == PEER or project is None:
                return log_.count_peers(tag, consts)
            seen = {f[project] for f, _ in log_.matches(tag, consts)}
            return len(seen)
        if kind == "max":
            return log_.max_value(tag, project, consts)
        if kind == "select":
            rows = log_.matches(tag, consts)
            if project is None:
                return [f for f, _ in rows]
            return [tuple(p if i == PEER else f[i] for i in project) for f, p in rows]
        raise ValueError(f"unknown query kind {kind!r}")

    def dump_jsonl(self):
        """Debug dump: one JSON line per record, sent and received interleaved
        per-direction in append order."""
        for direction, log_ in (("sent", self.sent), ("received", self.received)):
            for tag, fields, peer in log_.records():
                msg = _rebuild(tag, fields)
                yield json.dumps(
                    {"dir": direction, "peer": str(peer), "message": encode_message(msg)},
                    sort_keys=True, separators=(",", ":"))


def _rebuild(tag: str, fields: tuple) -> Message:
    from .core import MESSAGE_TYPES
    return MESSAGE_TYPES[tag](*fields)
