"""Price windows and backend dispatch: which (token, contract) prices moved, and when."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import httpx

from ..chain.address import Address, is_null
from ..chain.invocations import UserInvocation, net_deltas
from ..chain.tokens import TokenRegistry
from ..chain.transfers import TransferAction, TransferKind
from ..errors import NoSource, PriceScopeError, ScanTimeout, ZeroReserve
from ..operations import DeFiOperation, OpKind, PoolLabel
from .analytic import Model, apply_transfer, initial_balances, model_verdicts
from .llm import InferenceBackendConfig, parse_scores, query_backend, resolve_verdicts
from .prompts import build_prompt_type1, build_prompt_type2
from .sources import DEFAULT_SIGNATURES, SourceBundle, extract_price_functions
from .statements import (
    Backend,
    ChangeDescription,
    PriceChangeVerdict,
    PriceStatement,
    balance_change,
    generate_statements,
    supply_change,
)

log = logging.getLogger(__name__)

Position = int  # transaction-wide emission index of a transfer


@dataclass(frozen=True)
class PriceWindow:
    """A stretch of transfers whose net effect is judged as one price change."""

    index: int
    start: Position
    end: Position
    ops: tuple[DeFiOperation, ...]

    def contains(self, pos: Position) -> bool:
        return self.start <= pos <= self.end

    @property
    def anchor(self) -> dict:
        return {"window": self.index, "start": self.start, "end": self.end}


def build_windows(ops: Sequence[DeFiOperation], last: Position | None = None) -> list[PriceWindow]:
    """One window per operation; back-to-back swaps selling the same token share one.

    Splitting a sell across several pools (each its own cycle) is one
    manipulation step, so its combined effect is what gets judged. Given
    ``last`` (the final emission index) each window also runs on to the
    transfer before the next window starts, picking up protocol-internal
    moves that no operation claims, e.g. a buyback triggered by a stake.
    """
    ordered = sorted(ops, key=lambda op: (op.start, op.end))
    groups: list[list[DeFiOperation]] = []
    for op in ordered:
        prev = groups[-1][-1] if groups else None
        if (
            prev is not None
            and op.kind is OpKind.SWAP
            and prev.kind is OpKind.SWAP
            and op.token_in == prev.token_in
        ):
            groups[-1].append(op)
        else:
            groups.append([op])
    spans = [(min(o.start for o in g), max(o.end for o in g)) for g in groups]
    if last is not None:
        spans = [
            (start, max(end, spans[i + 1][0] - 1 if i + 1 < len(spans) else last))
            for i, (start, end) in enumerate(spans)
        ]
    return [PriceWindow(i, s, e, tuple(g)) for i, ((s, e), g) in enumerate(zip(spans, groups))]


def positioned(invocations: Iterable[UserInvocation]) -> list[tuple[Position, TransferAction]]:
    return sorted(((tr.seq, tr) for inv in invocations for tr in inv.transfers), key=lambda item: item[0])


def describe_changes(
    transfers: Iterable[TransferAction],
    uc: Iterable[Address] = (),
    tokens: TokenRegistry | None = None,
    labels: dict | None = None,
) -> list[ChangeDescription]:
    """Balance lines for every non-user account plus total-supply lines, in order of first appearance."""
    tokens = tokens or TokenRegistry()
    labels = labels or {}
    uc = frozenset(uc)
    balances, supply = net_deltas(transfers)
    out = []
    for (account, token), delta in balances.items():
        if delta == 0 or account in uc or is_null(account):
            continue
        out.append(
            balance_change(
                token,
                account,
                delta,
                tokens.name(token),
                labels.get(account) or account.short(),
                tokens.render(token, abs(delta)),
            )
        )
    for token, delta in supply.items():
        if delta:
            out.append(supply_change(token, delta, tokens.name(token), tokens.render(token, abs(delta))))
    return out


def relevant_tokens(contract: Address, transfers: Sequence[TransferAction]) -> list[Address]:
    """Tokens the contract's balance moved in, plus tokens it minted or burned itself."""
    balances, _ = net_deltas(transfers)
    found = [tok for (acct, tok), d in balances.items() if acct == contract and d != 0]
    for t in transfers:
        if t.kind is not TransferKind.TRANSFERRING and t.token == contract and t.token not in found:
            found.append(t.token)
    return list(dict.fromkeys(found))


@dataclass
class _Query:
    window: PriceWindow
    backend: Backend
    contract: Address
    statements: list[PriceStatement]
    prompt: str


def _analytic(windows, timeline, models, warnings) -> list[PriceChangeVerdict]:
    if not models or not windows:
        return []
    # snapshots just before each window start and just after each window end
    cuts = sorted({("pre", w.start) for w in windows} | {("post", w.end) for w in windows}, key=lambda c: (c[1], c[0] == "post"))
    bal = initial_balances(models)
    snaps = {}
    i = 0
    for tag, pos in cuts:
        while i < len(timeline) and (timeline[i][0] < pos or (tag == "post" and timeline[i][0] == pos)):
            apply_transfer(bal, timeline[i][1])
            i += 1
        snaps[(tag, pos)] = dict(bal)
    out = []
    broken: set[Address] = set()
    for w in windows:
        before, after = snaps[("pre", w.start)], snaps[("post", w.end)]
        for addr, model in models.items():
            if addr in broken:
                continue
            try:
                out.extend(model_verdicts(model, models, before, after, **w.anchor))
            except (ZeroReserve, ValueError, OverflowError, KeyError, PriceScopeError) as exc:
                broken.add(addr)
                _warn(warnings, "ModelError", f"price model {addr} unusable: {exc}", contract=addr)
    return out


def _warn(warnings, kind, message, **extra):
    log.warning(message)
    if warnings is not None:
        warnings.append({"kind": kind, "message": message, **{k: str(v) for k, v in extra.items()}})


def plan_queries(
    windows: Sequence[PriceWindow],
    timeline: Sequence[tuple[Position, TransferAction]],
    pools: Sequence[PoolLabel],
    bundles: dict[Address, SourceBundle],
    cfg: InferenceBackendConfig,
    *,
    models: dict | None = None,
    uc: Iterable[Address] = (),
    tokens: TokenRegistry | None = None,
    labels: dict | None = None,
    signatures=DEFAULT_SIGNATURES,
    warnings: list | None = None,
) -> list[_Query]:
    models = models or {}
    labels = labels or {}
    names = {**{t: tokens.name(t) for t in _all_tokens(timeline)}, **labels} if tokens else dict(labels)
    all_transfers = [tr for _, tr in timeline]
    skip = set(models) if cfg.kind == "auto" else set()

    type1: dict[Address, str] = {}
    if cfg.kind in ("llm-type1", "auto"):
        for addr, bundle in sorted(bundles.items()):
            if addr in skip:
                continue
            try:
                code = extract_price_functions(bundle, signatures)
            except NoSource:
                continue
            if code:
                type1[addr] = code
    type2: list[PoolLabel] = []
    if cfg.kind in ("llm-type2", "auto"):
        for pool in pools:
            if pool.address in skip or pool.address in type1 or len(pool.tokens) != 2:
                continue
            if pool.address in bundles and bundles[pool.address].verified and cfg.kind == "auto":
                continue
            type2.append(pool)

    queries = []
    for w in windows:
        inside = [tr for pos, tr in timeline if w.contains(pos)]
        changes = describe_changes(inside, uc, tokens, labels)
        if not changes:
            continue
        for addr, code in type1.items():
            statements = generate_statements(relevant_tokens(addr, all_transfers), [addr], names)
            if statements:
                queries.append(_Query(w, Backend.LLM_TYPE1, addr, statements, build_prompt_type1(code, statements, changes)))
        for pool in type2:
            statements = generate_statements(sorted(pool.tokens), [pool.address], names)
            queries.append(
                _Query(w, Backend.LLM_TYPE2, pool.address, statements, build_prompt_type2(pool, statements, changes, names))
            )
    return queries


def _all_tokens(timeline):
    return list(dict.fromkeys(tr.token for _, tr in timeline))


def infer_price_changes(
    ops: Sequence[DeFiOperation],
    pools: Sequence[PoolLabel],
    invocations: Sequence[UserInvocation],
    bundles: dict[Address, SourceBundle] | None,
    cfg: InferenceBackendConfig,
    *,
    models: dict[Address, Model] | None = None,
    uc: Iterable[Address] = (),
    tokens: TokenRegistry | None = None,
    labels: dict | None = None,
    warnings: list | None = None,
    deadline: float | None = None,
    transport: httpx.BaseTransport | None = None,
    signatures=DEFAULT_SIGNATURES,
) -> list[PriceChangeVerdict]:
    """Verdicts for every price window, merged across backends.

    Backend errors are recorded as warnings for the affected query only.
    Where the analytic backend and an LLM backend both judged the same
    (window, token, contract), the analytic verdict is kept.
    """
    timeline = positioned(invocations)
    windows = build_windows(ops, timeline[-1][0] if timeline else None)
    models = models or {}
    analytic = _analytic(windows, timeline, models, warnings) if cfg.kind in ("analytic", "auto") else []

    llm: list[PriceChangeVerdict] = []
    if cfg.uses_llm:
        queries = plan_queries(
            windows, timeline, pools, bundles or {}, cfg,
            models=models, uc=uc, tokens=tokens, labels=labels, signatures=signatures, warnings=warnings,
        )
        llm = _run_queries(queries, cfg, warnings, deadline, transport)

    taken = {(v.window, v.token, v.contract) for v in analytic}
    merged = analytic + [v for v in llm if (v.window, v.token, v.contract) not in taken]
    merged.sort(key=lambda v: (v.start, v.end, v.contract, v.token, v.backend.value))
    return merged


def _run_queries(queries, cfg, warnings, deadline, transport) -> list[PriceChangeVerdict]:
    if not queries:
        return []

    def run(q: _Query):
        remaining = None if deadline is None else deadline - time.monotonic()
        if remaining is not None and remaining <= 0:
            raise ScanTimeout("scan deadline reached before the query was sent")
        response = query_backend(cfg, q.prompt, timeout=remaining, transport=transport)
        notes: list[str] = []
        scored = parse_scores(response, q.statements, notes)
        return resolve_verdicts(scored, q.backend, **q.window.anchor), notes

    out = []
    with ThreadPoolExecutor(max_workers=max(1, cfg.max_concurrent)) as pool:
        futures = [pool.submit(run, q) for q in queries]
        for q, fut in zip(queries, futures):
            try:
                verdicts, notes = fut.result()
            except PriceScopeError as exc:
                _warn(warnings, type(exc).__name__, f"{q.backend.value} query for {q.contract} failed: {exc}",
                      contract=q.contract, window=q.window.index)
                continue
            for note in notes:
                _warn(warnings, "ScoreClamped", note, contract=q.contract)
            out.extend(verdicts)
    return out
