"""Recovering Swap/Deposit/Withdraw/Borrow/Stake/Claim operations from a transfer graph."""
from __future__ import annotations

import bisect
import enum
import time
from collections import defaultdict
from dataclasses import dataclass, replace

from .chain.address import Address
from .chain.transfers import TransferKind
from .errors import ScanTimeout, SearchBudgetExceeded
from .graph import NULL, UC, TGEdge, TransferGraph

DEFAULT_SEARCH_BUDGET = 10**6


class OpKind(enum.Enum):
    SWAP = "Swap"
    DEPOSIT = "Deposit"
    WITHDRAW = "Withdraw"
    BORROW = "Borrow"
    STAKE = "Stake"
    CLAIM = "Claim"


PRECEDENCE = {
    OpKind.SWAP: 0,
    OpKind.DEPOSIT: 1,
    OpKind.WITHDRAW: 1,
    OpKind.BORROW: 1,
    OpKind.STAKE: 2,
    OpKind.CLAIM: 2,
}


@dataclass(frozen=True)
class DeFiOperation:
    kind: OpKind
    edge_refs: tuple[int, ...]
    contracts: tuple[Address, ...]
    token_in: Address | None = None
    token_out: Address | None = None
    token_proof: Address | None = None
    token_debt: Address | None = None
    invocation: int = 0
    # transaction-wide emission index of each edge; orders operations across invocations
    seqs: tuple[int, ...] = ()

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.edge_refs, self.edge_refs[1:])):
            raise ValueError("edge_refs must be strictly increasing")
        if self.kind is OpKind.SWAP and self.token_in == self.token_out:
            raise ValueError("swap must exchange two different tokens")

    @property
    def span(self) -> tuple[int, int]:
        return self.edge_refs[0], self.edge_refs[-1]

    @property
    def start(self) -> int:
        return self.seqs[0] if self.seqs else self.edge_refs[0]

    @property
    def end(self) -> int:
        return self.seqs[-1] if self.seqs else self.edge_refs[-1]

    @property
    def contract(self) -> Address:
        return self.contracts[0]

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "invocation": self.invocation,
            "edges": list(self.edge_refs),
            "seq": [self.start, self.end],
            "contracts": list(self.contracts),
        }
        for name in ("token_in", "token_out", "token_proof", "token_debt"):
            value = getattr(self, name)
            if value is not None:
                out[_camel(name)] = value
        return out


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(p.title() for p in rest)


def _stamped(g: TransferGraph, ops: list[DeFiOperation]) -> list[DeFiOperation]:
    return [replace(op, seqs=tuple(g.edge(t).transfer.seq for t in op.edge_refs)) for op in ops]


@dataclass(frozen=True)
class PoolLabel:
    address: Address
    labeled_by: OpKind = OpKind.SWAP
    tokens: frozenset[Address] = frozenset()


# --- swaps ----------------------------------------------------------------------


def _swap_cycles(g: TransferGraph, cap: int, deadline: float | None) -> list[list[TGEdge]]:
    adj: dict[str, list[TGEdge]] = defaultdict(list)
    for e in g.edges:  # edges are already in time order
        if e.kind is TransferKind.TRANSFERRING:
            adj[e.src].append(e)
    times = {node: [e.time_index for e in es] for node, es in adj.items()}
    cycles: list[list[TGEdge]] = []
    visited = 0

    def tick():
        nonlocal visited
        visited += 1
        if visited > cap:
            raise SearchBudgetExceeded(visited, cap)
        if deadline is not None and visited % 4096 == 0 and time.monotonic() > deadline:
            raise ScanTimeout("swap search exceeded the scan deadline")

    def dfs(node: str, after: int, path: list[TGEdge], seen: set[str]):
        out = adj.get(node, [])
        for e in out[bisect.bisect_right(times[node], after):] if out else ():
            tick()
            if e.dst == UC:
                if e.token != path[0].token:
                    cycles.append(path + [e])
                continue
            if e.dst in seen or e.dst == NULL:
                continue
            seen.add(e.dst)
            path.append(e)
            dfs(e.dst, e.time_index, path, seen)
            path.pop()
            seen.discard(e.dst)

    for first in adj.get(UC, []):
        tick()
        if first.dst == UC:
            continue  # a lone self-loop cannot change tokens
        dfs(first.dst, first.time_index, [first], {first.dst})
    return cycles


def recover_swaps(
    g: TransferGraph,
    *,
    budget: int = DEFAULT_SEARCH_BUDGET,
    deadline: float | None = None,
) -> tuple[list[DeFiOperation], list[PoolLabel]]:
    """Depth-first search for UC→…→UC cycles of token transfers.

    A cycle qualifies when every edge is a plain transfer, time indices
    strictly increase along it, and the first and last tokens differ.
    Intermediate accounts must be distinct and are labeled as pools.
    """
    ops: list[DeFiOperation] = []
    pool_tokens: dict[Address, set[Address]] = defaultdict(set)
    for cycle in _swap_cycles(g, budget, deadline):
        pools = tuple(Address(e.dst) for e in cycle[:-1])
        for inbound, outbound in zip(cycle, cycle[1:]):
            pool_tokens[Address(inbound.dst)].update((inbound.token, outbound.token))
        ops.append(
            DeFiOperation(
                OpKind.SWAP,
                tuple(e.time_index for e in cycle),
                pools,
                token_in=cycle[0].token,
                token_out=cycle[-1].token,
                invocation=g.invocation,
            )
        )
    labels = [PoolLabel(a, OpKind.SWAP, frozenset(t)) for a, t in sorted(pool_tokens.items())]
    return _stamped(g, ops), labels


# --- mint/burn evidenced operations ---------------------------------------------------


def _is_transfer(e: TGEdge) -> bool:
    return e.kind is TransferKind.TRANSFERRING


def _outflows(g, exclude):
    return [e for e in g.edges if _is_transfer(e) and e.src == UC and e.dst != UC and e.time_index not in exclude]


def _inflows(g, exclude):
    return [e for e in g.edges if _is_transfer(e) and e.dst == UC and e.src != UC and e.time_index not in exclude]


def _mints_to_uc(g, exclude=frozenset()):
    return [e for e in g.edges if e.kind is TransferKind.MINTING and e.dst == UC and e.time_index not in exclude]


def _burns_from_uc(g, exclude=frozenset()):
    return [e for e in g.edges if e.kind is TransferKind.BURNING and e.src == UC and e.time_index not in exclude]


def _related(contract: str, evidence: TGEdge) -> bool:
    """The contract was executing when ``evidence`` was emitted."""
    return contract in evidence.transfer.call_path[:-1]


def _pair(anchors, candidates, fits, distance, contract_of):
    """Greedy pairing in anchor order: candidates emitted under the anchor's contract first, then any."""
    used: set[int] = set()
    pairs = {}
    for related_only in (True, False):
        for a in anchors:
            if a.time_index in pairs:
                continue
            pool = [
                c
                for c in candidates
                if c.time_index not in used and fits(a, c) and (not related_only or _related(contract_of(a, c), c))
            ]
            if not pool:
                continue
            best = min(pool, key=lambda c: (distance(a, c), c.time_index))
            used.add(best.time_index)
            pairs[a.time_index] = best
    return [(a, pairs[a.time_index]) for a in anchors if a.time_index in pairs]


def recover_deposits(g: TransferGraph, exclude: frozenset[int] = frozenset()) -> list[DeFiOperation]:
    """Outflow from UC paired with the nearest later mint of a different token to UC."""
    pairs = _pair(
        _outflows(g, exclude),
        _mints_to_uc(g, exclude),
        lambda out, m: m.time_index > out.time_index and m.token != out.token,
        lambda out, m: m.time_index - out.time_index,
        lambda out, m: out.dst,
    )
    return _stamped(g, [
        DeFiOperation(
            OpKind.DEPOSIT,
            (out.time_index, m.time_index),
            (Address(out.dst),),
            token_in=out.token,
            token_proof=m.token,
            invocation=g.invocation,
        )
        for out, m in pairs
    ])


def recover_withdraws(g: TransferGraph, exclude: frozenset[int] = frozenset()) -> list[DeFiOperation]:
    """Burn of a proof token by UC followed by the nearest inflow of another token."""
    pairs = _pair(
        _burns_from_uc(g, exclude),
        _inflows(g, exclude),
        lambda burn, e: e.time_index > burn.time_index and e.token != burn.token,
        lambda burn, e: e.time_index - burn.time_index,
        lambda burn, e: e.src,
    )
    return _stamped(g, [
        DeFiOperation(
            OpKind.WITHDRAW,
            (burn.time_index, e.time_index),
            (Address(e.src),),
            token_out=e.token,
            token_proof=burn.token,
            invocation=g.invocation,
        )
        for burn, e in pairs
    ])


def recover_borrows(g: TransferGraph, exclude: frozenset[int] = frozenset()) -> list[DeFiOperation]:
    """Inflow to UC paired with the closest-in-time mint of a different (debt) token to UC.

    Mints emitted while the lending contract was executing are preferred, so
    an unrelated inflow (a flash loan, say) cannot take another call's debt mint.
    """
    pairs = _pair(
        _inflows(g, exclude),
        _mints_to_uc(g, exclude),
        lambda inflow, m: m.token != inflow.token,
        lambda inflow, m: abs(m.time_index - inflow.time_index),
        lambda inflow, m: inflow.src,
    )
    return _stamped(g, [
        DeFiOperation(
            OpKind.BORROW,
            tuple(sorted((inflow.time_index, debt.time_index))),
            (Address(inflow.src),),
            token_out=inflow.token,
            token_debt=debt.token,
            invocation=g.invocation,
        )
        for inflow, debt in pairs
    ])


def recover_stakes(
    g: TransferGraph, exclude: frozenset[int] = frozenset(), *, require_active: bool = True
) -> list[DeFiOperation]:
    """Outflow from UC with no mint to UC anywhere after it.

    With ``require_active`` the receiving contract must be executing when the
    transfer happens (it pulled the tokens), which keeps plain payments and
    relay hops from reading as stakes.
    """
    mint_times = [m.time_index for m in _mints_to_uc(g)]
    ops = []
    for out in _outflows(g, exclude):
        if any(t > out.time_index for t in mint_times):
            continue
        if require_active and out.transfer.receiver not in out.transfer.call_path[:-1]:
            continue
        ops.append(
            DeFiOperation(
                OpKind.STAKE, (out.time_index,), (Address(out.dst),), token_in=out.token, invocation=g.invocation
            )
        )
    return _stamped(g, ops)


def recover_claims(
    g: TransferGraph, exclude: frozenset[int] = frozenset(), *, require_active: bool = True
) -> list[DeFiOperation]:
    """Inflow to UC with no burn by UC before it; see ``recover_stakes`` for ``require_active``."""
    burn_times = [b.time_index for b in _burns_from_uc(g)]
    ops = []
    for inflow in _inflows(g, exclude):
        if any(t < inflow.time_index for t in burn_times):
            continue
        if require_active and inflow.transfer.sender not in inflow.transfer.call_path[:-1]:
            continue
        ops.append(
            DeFiOperation(
                OpKind.CLAIM, (inflow.time_index,), (Address(inflow.src),), token_out=inflow.token,
                invocation=g.invocation,
            )
        )
    return _stamped(g, ops)


def recover_all(
    g: TransferGraph,
    *,
    budget: int = DEFAULT_SEARCH_BUDGET,
    deadline: float | None = None,
    require_active: bool = True,
    skip_swaps: bool = False,
) -> tuple[list[DeFiOperation], list[PoolLabel]]:
    """Run every recoverer with precedence Swap > Deposit/Withdraw/Borrow > Stake/Claim.

    Edges used by a higher class are invisible to lower classes; within the
    middle class deposits, withdraws and borrows claim edges in that order.
    ``skip_swaps`` is the fallback after the swap search ran out of budget.
    """
    if skip_swaps:
        swaps, labels = [], []
    else:
        swaps, labels = recover_swaps(g, budget=budget, deadline=deadline)
    consumed = {t for op in swaps for t in op.edge_refs}
    middle: list[DeFiOperation] = []
    for recover in (recover_deposits, recover_withdraws, recover_borrows):
        found = recover(g, frozenset(consumed))
        middle.extend(found)
        consumed.update(t for op in found for t in op.edge_refs)
    lower = recover_stakes(g, frozenset(consumed), require_active=require_active)
    lower += recover_claims(g, frozenset(consumed), require_active=require_active)
    ops = sorted(swaps + middle + lower, key=lambda op: (op.span, PRECEDENCE[op.kind]))
    return ops, labels
