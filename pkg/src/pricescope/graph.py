"""Transfer graphs: one directed multigraph of time-indexed transfers per user invocation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable

from .chain.address import Address, is_null
from .chain.invocations import UserInvocation
from .chain.tokens import TokenRegistry
from .chain.trace import TransactionTrace
from .chain.transfers import TransferAction, TransferKind

UC = "UC"
NULL = "NULL"


@lru_cache(maxsize=1)
def known_routers() -> frozenset[Address]:
    doc = json.loads(resources.files("pricescope.data").joinpath("routers.json").read_text())
    return frozenset(Address(a) for a in doc["routers"])


@dataclass(frozen=True)
class UserControlledSet:
    accounts: frozenset[Address]
    # True when the entry callee was admitted by the entry-callee heuristic
    entry_heuristic: bool = False

    def __contains__(self, address) -> bool:
        return address in self.accounts

    def __iter__(self):
        return iter(sorted(self.accounts))

    def __len__(self) -> int:
        return len(self.accounts)


def _emits_transfers(trace: TransactionTrace, address: Address) -> bool:
    from .chain.transfers import TRANSFER_TOPIC

    return any(
        log.address == address and log.topic0 == TRANSFER_TOPIC for f in trace.frames() for log in f.logs
    )


def _only_called_by_initiator(trace: TransactionTrace, address: Address) -> bool:
    """Every frame calling ``address`` is the entry frame or a callback nested under ``address`` itself."""

    def visit(frame, inside: bool) -> bool:
        for child in frame.children:
            if child.callee == address and not inside:
                return False
            if not visit(child, inside or child.callee == address):
                return False
        return True

    return visit(trace.entry, trace.entry.callee == address)


def identify_user_controlled(
    trace: TransactionTrace,
    *,
    routers: Iterable[Address] | None = None,
    known_protocols: Iterable[Address] = (),
    extra: Iterable[Address] = (),
) -> UserControlledSet:
    """Initiator, the entry contract when it looks user-owned, and everything they create.

    The entry callee is admitted when it is not a known router or protocol,
    is not itself a token (emits no Transfer logs), and is only entered by the
    initiator or through callbacks inside its own execution.
    """
    annotations = trace.annotations or {}
    excluded = set(known_routers() if routers is None else (Address(a) for a in routers))
    excluded.update(Address(a) for a in known_protocols)
    excluded.update(Address(a) for a in annotations.get("knownProtocols", []))
    members = {trace.initiator}
    members.update(Address(a) for a in extra)
    members.update(Address(a) for a in annotations.get("userControlled", []))

    heuristic = False
    entry = trace.entry.callee
    if (
        entry not in members
        and entry not in excluded
        and not is_null(entry)
        and not trace.entry.is_create
        and trace.entry.selector != "0x"
        and not _emits_transfers(trace, entry)
        and _only_called_by_initiator(trace, entry)
    ):
        members.add(entry)
        heuristic = True
    if trace.entry.is_create:
        members.add(entry)

    # closure: contracts created by a member, iterated to a fixed point
    changed = True
    while changed:
        changed = False
        for frame in trace.frames():
            if frame.is_create and frame.caller in members and frame.callee not in members:
                members.add(frame.callee)
                changed = True
    return UserControlledSet(frozenset(members), heuristic)


@dataclass(frozen=True)
class TGEdge:
    time_index: int
    transfer: TransferAction
    src: str
    dst: str

    @property
    def token(self) -> Address:
        return self.transfer.token

    @property
    def kind(self) -> TransferKind:
        return self.transfer.kind


@dataclass(frozen=True)
class TransferGraph:
    nodes: frozenset[str]
    edges: tuple[TGEdge, ...]
    uc: UserControlledSet = field(default_factory=lambda: UserControlledSet(frozenset()))
    invocation: int = 0

    def edge(self, time_index: int) -> TGEdge:
        return self.edges[time_index - 1]

    def out_edges(self, node: str) -> list[TGEdge]:
        return [e for e in self.edges if e.src == node]

    def to_dict(self) -> dict:
        return {
            "invocation": self.invocation,
            "nodes": sorted(self.nodes),
            "edges": [
                {
                    "t": e.time_index,
                    "src": e.src,
                    "dst": e.dst,
                    "sender": e.transfer.sender,
                    "receiver": e.transfer.receiver,
                    "token": e.token,
                    "value": str(e.transfer.value),
                    "kind": e.kind.value,
                }
                for e in self.edges
            ],
        }

    def serialize(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def node_of(address: Address, uc: UserControlledSet) -> str:
    if is_null(address):
        return NULL
    if address in uc:
        return UC
    return str(address)


def build_graph(inv: UserInvocation, uc: UserControlledSet) -> TransferGraph:
    edges = []
    nodes = {UC}
    for t_index, transfer in inv.indexed():
        src, dst = node_of(transfer.sender, uc), node_of(transfer.receiver, uc)
        nodes.update((src, dst))
        edges.append(TGEdge(t_index, transfer, src, dst))
    return TransferGraph(frozenset(nodes), tuple(edges), uc, inv.index)


def to_dot(g: TransferGraph, tokens: TokenRegistry | None = None, labels: dict | None = None) -> str:
    tokens = tokens or TokenRegistry()
    labels = labels or {}

    def label(node: str) -> str:
        if node in (UC, NULL):
            return "∅" if node == NULL else UC
        return labels.get(node) or Address(node).short()

    lines = [f"digraph tg_{g.invocation} {{", "  rankdir=LR;"]
    for node in sorted(g.nodes):
        lines.append(f'  "{node}" [label="{label(node)}"];')
    for e in g.edges:
        amount = tokens.render(e.token, e.transfer.value)
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="T{e.time_index}:{tokens.name(e.token)}:{amount}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
