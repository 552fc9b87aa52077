"""Slicing a trace into user invocations and per-invocation balance accounting."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

from .address import ZERO_ADDRESS, Address, is_null
from .trace import CallFrame, TransactionTrace
from .transfers import TransferAction, TransferKind, decode_transfers

log = logging.getLogger(__name__)

# Calls that only move or approve tokens; on their own they are not a protocol interaction
# and are folded into the next protocol call (e.g. transfer-then-swap on a V2 pair).
BARE_TOKEN_SELECTORS = frozenset(
    {
        "0xa9059cbb",  # transfer(address,uint256)
        "0x23b872dd",  # transferFrom(address,address,uint256)
        "0x095ea7b3",  # approve(address,uint256)
        "0xd0e30db0",  # deposit()  (WETH wrap)
        "0x2e1a7d4d",  # withdraw(uint256)  (WETH unwrap)
    }
)

SIGNED_257_MIN = -(1 << 256)
SIGNED_257_MAX = (1 << 256) - 1


@dataclass(frozen=True)
class UserInvocation:
    index: int
    roots: tuple[CallFrame, ...]
    transfers: tuple[TransferAction, ...]

    @property
    def root_frame(self) -> CallFrame:
        return self.roots[-1]

    def indexed(self) -> Iterator[tuple[int, TransferAction]]:
        """(time index, transfer) pairs, time indices 1..n in emission order."""
        return enumerate(self.transfers, start=1)


@dataclass(frozen=True)
class BalanceDelta:
    account: Address
    token: Address
    delta: int
    total_supply_delta: int | None = None


def _find_roots(frame: CallFrame, uc: frozenset[Address], nested: bool = False) -> list[CallFrame]:
    roots: list[CallFrame] = []
    for child in frame.children:
        if child.callee in uc:
            roots.extend(_find_roots(child, uc, nested))
        elif child.caller in uc:
            # inside a callback, bare token moves settle the enclosing protocol call
            if nested and child.selector in BARE_TOKEN_SELECTORS:
                continue
            roots.append(child)
    return roots


def _callbacks(root: CallFrame, uc: frozenset[Address]) -> Iterator[CallFrame]:
    """Outermost user-controlled frames re-entered from inside a protocol call."""
    for child in root.children:
        if child.callee in uc:
            yield child
        else:
            yield from _callbacks(child, uc)


def _collect(frame: CallFrame, uc: frozenset[Address], nested: bool, out: list[list[CallFrame]]) -> None:
    roots = _find_roots(frame, uc, nested)
    out.extend(_group_bare_calls(roots))
    for root in roots:
        for cb in _callbacks(root, uc):
            _collect(cb, uc, True, out)


def _group_bare_calls(roots: list[CallFrame]) -> list[list[CallFrame]]:
    groups: list[list[CallFrame]] = []
    pending: list[CallFrame] = []
    for frame in roots:
        pending.append(frame)
        if frame.selector not in BARE_TOKEN_SELECTORS:
            groups.append(pending)
            pending = []
    if pending:
        if groups:
            groups[-1].extend(pending)
        else:
            groups.append(pending)
    return groups


def slice_user_invocations(
    trace: TransactionTrace,
    uc: Iterable[Address],
    transfers: list[TransferAction] | None = None,
    warnings: list[str] | None = None,
) -> list[UserInvocation]:
    """Split a trace into user invocations.

    A call made by a user-controlled account into a non-user-controlled
    contract opens an invocation. Calls that a user-controlled callback
    (a flash-loan receiver, say) makes into other protocols open nested
    invocations of their own, while bare token calls inside a callback stay
    with the protocol call that triggered it (swap-callback payments). At
    the top level bare token calls are merged into the following protocol
    call. Each transfer belongs to the innermost invocation enclosing it.
    """
    uc = frozenset(uc)
    if transfers is None:
        transfers = decode_transfers(trace)
    groups: list[list[CallFrame]] = []
    if trace.entry.callee in uc:
        _collect(trace.entry, uc, False, groups)
    if not groups:
        groups = [[trace.entry]]

    frame_ids = {id(f): i for i, f in enumerate(trace.frames())}
    groups.sort(key=lambda g: frame_ids[id(g[0])])
    owner: dict[int, int] = {}
    for gi, group in enumerate(groups):
        for root in group:
            owner[frame_ids[id(root)]] = gi

    buckets: list[list[TransferAction]] = [[] for _ in groups]
    orphans = 0
    for t in transfers:
        # innermost enclosing root wins, so nested protocol calls get their own invocation
        gi = next((owner[fid] for fid in reversed(t.frame_ids) if fid in owner), None)
        if gi is None:
            orphans += 1
            continue
        buckets[gi].append(t)
    if orphans:
        msg = f"{orphans} transfer(s) emitted by user-controlled code outside any invocation were ignored"
        log.info(msg)
        if warnings is not None:
            warnings.append(msg)
    return [
        UserInvocation(index=i, roots=tuple(g), transfers=tuple(b))
        for i, (g, b) in enumerate(zip(groups, buckets))
    ]


def _check(value: int) -> int:
    if not SIGNED_257_MIN <= value <= SIGNED_257_MAX:
        raise OverflowError("balance delta exceeds signed 257-bit range")
    return value


def net_deltas(transfers: Iterable[TransferAction]) -> tuple[dict[tuple[Address, Address], int], dict[Address, int]]:
    """Raw accumulation: {(account, token): delta} over non-null accounts, {token: supply delta}."""
    balances: dict[tuple[Address, Address], int] = defaultdict(int)
    supply: dict[Address, int] = defaultdict(int)
    for t in transfers:
        if t.kind is TransferKind.MINTING:
            supply[t.token] = _check(supply[t.token] + t.value)
        elif t.kind is TransferKind.BURNING:
            supply[t.token] = _check(supply[t.token] - t.value)
        if not is_null(t.sender):
            key = (t.sender, t.token)
            balances[key] = _check(balances[key] - t.value)
        if not is_null(t.receiver):
            key = (t.receiver, t.token)
            balances[key] = _check(balances[key] + t.value)
    return dict(balances), dict(supply)


def compute_balance_deltas(inv: UserInvocation | Iterable[TransferAction]) -> list[BalanceDelta]:
    """One entry per (account, token) touched, sorted by (token, account).

    Minted/burned tokens additionally get an entry for the canonical zero
    address carrying ``total_supply_delta``; its ``delta`` is the negated
    supply change, so deltas per token always sum to zero.
    """
    transfers = inv.transfers if isinstance(inv, UserInvocation) else inv
    balances, supply = net_deltas(transfers)
    out = [BalanceDelta(a, tok, d) for (a, tok), d in balances.items()]
    minted_or_burned = {t.token for t in transfers if t.kind is not TransferKind.TRANSFERRING}
    for tok in minted_or_burned:
        s = supply.get(tok, 0)
        out.append(BalanceDelta(ZERO_ADDRESS, tok, -s, total_supply_delta=s))
    out.sort(key=lambda d: (d.token, d.account))
    return out
