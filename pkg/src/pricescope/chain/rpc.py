"""Fetch a transaction over JSON-RPC and normalize it into the fixture model."""
from __future__ import annotations

import itertools
import logging
from typing import Any

import httpx

from ..errors import NetworkError, TracerUnsupported, TxNotFound
from .address import Address
from .trace import CallFrame, LogRecord, TransactionTrace

log = logging.getLogger(__name__)

CALL_TRACER = {"tracer": "callTracer", "tracerConfig": {"withLog": True}}


class RpcClient:
    def __init__(self, endpoint: str, *, timeout: float = 60.0, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._ids = itertools.count(1)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def call(self, method: str, *params: Any) -> Any:
        body = {"jsonrpc": "2.0", "id": next(self._ids), "method": method, "params": list(params)}
        try:
            resp = self._client.post(self.endpoint, json=body)
            resp.raise_for_status()
            doc = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise NetworkError(f"{method} via {self.endpoint}: {exc}") from exc
        if "error" in doc and doc["error"] is not None:
            err = doc["error"]
            code, message = err.get("code"), str(err.get("message", ""))
            lowered = message.lower()
            if code == -32601 or "tracer" in lowered or "not supported" in lowered or "does not exist" in lowered:
                raise TracerUnsupported(f"{method}: {message}")
            if "not found" in lowered:
                raise TxNotFound(message)
            raise NetworkError(f"{method}: rpc error {code}: {message}")
        return doc.get("result")


def _failed(raw: dict) -> bool:
    return bool(raw.get("error"))


def _convert(raw: dict, depth: int, counter: itertools.count, reverted: bool) -> CallFrame:
    reverted = reverted or _failed(raw)
    data = (raw.get("input") or "0x").lower()
    children_raw = raw.get("calls") or []
    logs_raw = [] if reverted else (raw.get("logs") or [])
    # interleave logs with child calls by their position, assigning emission indices
    by_position: dict[int, list[dict]] = {}
    for entry in logs_raw:
        pos = entry.get("position", len(children_raw))
        # geth reports positions as hex strings, some clients as plain integers
        pos = int(pos, 0) if isinstance(pos, str) else int(pos)
        by_position.setdefault(pos, []).append(entry)
    logs: list[LogRecord] = []
    children: list[CallFrame] = []

    def flush(pos: int):
        for entry in by_position.pop(pos, []):
            logs.append(
                LogRecord(
                    address=Address(entry["address"]),
                    topics=tuple(t.lower() for t in entry.get("topics", [])),
                    data=(entry.get("data") or "0x").lower(),
                    log_index=next(counter),
                )
            )

    for i, child in enumerate(children_raw):
        flush(i)
        children.append(_convert(child, depth + 1, counter, reverted))
    for pos in sorted(by_position):
        flush(pos)
    call_type = str(raw.get("type", "CALL")).upper()
    return CallFrame(
        caller=Address(raw["from"]),
        callee=Address(raw.get("to") or "0x" + "00" * 20),
        selector=data[:10] if len(data) >= 10 and not call_type.startswith("CREATE") else "0x",
        depth=depth,
        children=tuple(children),
        logs=tuple(logs),
        call_type=call_type,
    )


def trace_from_call_tracer(tx_hash: str, root: dict, *, block_number: int, chain_id: int) -> TransactionTrace:
    entry = _convert(root, 0, itertools.count(), False)
    return TransactionTrace(
        tx_hash=tx_hash.lower(),
        initiator=entry.caller,
        entry=entry,
        block_number=block_number,
        chain_id=chain_id,
    )


def fetch_trace(
    endpoint: str,
    tx_hash: str,
    *,
    timeout: float = 60.0,
    transport: httpx.BaseTransport | None = None,
) -> TransactionTrace:
    with RpcClient(endpoint, timeout=timeout, transport=transport) as rpc:
        tx = rpc.call("eth_getTransactionByHash", tx_hash)
        if tx is None:
            raise TxNotFound(tx_hash)
        root = rpc.call("debug_traceTransaction", tx_hash, CALL_TRACER)
        if not root:
            raise TxNotFound(tx_hash)
        chain_id = int(rpc.call("eth_chainId"), 16)
        receipt = rpc.call("eth_getTransactionReceipt", tx_hash)
    trace = trace_from_call_tracer(
        tx_hash, root, block_number=int(tx.get("blockNumber") or "0x0", 16), chain_id=chain_id
    )
    if receipt is not None:
        n_logs = sum(len(f.logs) for f in trace.frames())
        if n_logs != len(receipt.get("logs", [])):
            log.warning("trace has %d logs but receipt has %d", n_logs, len(receipt.get("logs", [])))
    return trace
