"""Call-tree model and the fixture JSON format (the single source of truth for traces)."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from ..errors import ParseError, VersionError
from .address import Address

FIXTURE_VERSION = 1


@dataclass(frozen=True)
class LogRecord:
    address: Address
    topics: tuple[str, ...]
    data: str = "0x"
    log_index: int | None = None

    @property
    def topic0(self) -> str | None:
        return self.topics[0] if self.topics else None


@dataclass(frozen=True)
class CallFrame:
    caller: Address
    callee: Address
    selector: str = "0x"
    depth: int = 0
    children: tuple[CallFrame, ...] = ()
    logs: tuple[LogRecord, ...] = ()
    call_type: str = "CALL"

    @property
    def is_create(self) -> bool:
        return self.call_type in ("CREATE", "CREATE2")

    def walk(self) -> Iterator[CallFrame]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True, eq=True)
class TransactionTrace:
    tx_hash: str
    initiator: Address
    entry: CallFrame
    block_number: int = 0
    chain_id: int = 1
    # Optional side-channel metadata (token symbols, labels, price models, ...).
    annotations: dict = field(default_factory=dict, compare=False, hash=False)

    def frames(self) -> Iterator[CallFrame]:
        return self.entry.walk()

    def emitted_logs(self) -> list[tuple[LogRecord, tuple[CallFrame, ...]]]:
        """All logs in emission order, each with the stack of frames enclosing it.

        Emission order is the global ``logIndex`` when every log carries one,
        otherwise a pre-order walk (a frame's own logs before its children's).
        """
        out: list[tuple[LogRecord, tuple[CallFrame, ...]]] = []

        def visit(frame: CallFrame, stack: tuple[CallFrame, ...]):
            stack = stack + (frame,)
            for log in frame.logs:
                out.append((log, stack))
            for child in frame.children:
                visit(child, stack)

        visit(self.entry, ())
        if out and all(log.log_index is not None for log, _ in out):
            out.sort(key=lambda item: item[0].log_index)
        return out


# --- parsing -----------------------------------------------------------------


def _hex(value: Any, what: str, nbytes: int | None = None) -> str:
    if not isinstance(value, str) or not value.startswith(("0x", "0X")):
        raise ParseError(f"{what}: expected 0x-prefixed hex, got {value!r}")
    body = value[2:]
    try:
        bytes.fromhex(body if len(body) % 2 == 0 else "0" + body)
    except ValueError:
        raise ParseError(f"{what}: invalid hex {value!r}") from None
    if nbytes is not None and len(body) != 2 * nbytes:
        raise ParseError(f"{what}: expected {nbytes} bytes, got {value!r}")
    return "0x" + body.lower()


def _addr(value: Any, what: str) -> Address:
    try:
        return Address(value)
    except (ValueError, TypeError):
        raise ParseError(f"{what}: invalid address {value!r}") from None


def _parse_log(raw: Any, where: str) -> LogRecord:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: log must be an object")
    topics = raw.get("topics", [])
    if not isinstance(topics, list):
        raise ParseError(f"{where}: topics must be a list")
    idx = raw.get("logIndex")
    if idx is not None and not isinstance(idx, int):
        raise ParseError(f"{where}: logIndex must be an integer")
    return LogRecord(
        address=_addr(raw.get("address"), f"{where}.address"),
        topics=tuple(_hex(t, f"{where}.topics") for t in topics),
        data=_hex(raw.get("data", "0x"), f"{where}.data"),
        log_index=idx,
    )


def _parse_frame(raw: Any, where: str, expected_depth: int) -> CallFrame:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: call must be an object")
    depth = raw.get("depth", expected_depth)
    if depth != expected_depth:
        raise ParseError(f"{where}: depth {depth} but parent implies {expected_depth}")
    selector = _hex(raw.get("selector", "0x"), f"{where}.selector")
    if len(selector) not in (2, 10):
        raise ParseError(f"{where}: selector must be empty or 4 bytes")
    children = raw.get("children", [])
    logs = raw.get("logs", [])
    if not isinstance(children, list) or not isinstance(logs, list):
        raise ParseError(f"{where}: children/logs must be lists")
    return CallFrame(
        caller=_addr(raw.get("caller"), f"{where}.caller"),
        callee=_addr(raw.get("callee"), f"{where}.callee"),
        selector=selector,
        depth=depth,
        children=tuple(
            _parse_frame(c, f"{where}.children[{i}]", depth + 1) for i, c in enumerate(children)
        ),
        logs=tuple(_parse_log(l, f"{where}.logs[{i}]") for i, l in enumerate(logs)),
        call_type=str(raw.get("type", "CALL")).upper(),
    )


def trace_from_dict(doc: Any) -> TransactionTrace:
    if not isinstance(doc, dict):
        raise ParseError("fixture root must be an object")
    if "version" not in doc:
        raise ParseError("fixture missing 'version'")
    if doc["version"] != FIXTURE_VERSION:
        raise VersionError(f"unsupported fixture version {doc['version']!r}")
    for key in ("txHash", "initiator", "calls"):
        if key not in doc:
            raise ParseError(f"fixture missing {key!r}")
    initiator = _addr(doc["initiator"], "initiator")
    calls = doc["calls"]
    if not isinstance(calls, list):
        raise ParseError("'calls' must be a list")
    if len(calls) > 1:
        raise ParseError("'calls' must hold a single entry frame")
    if calls:
        entry = _parse_frame(calls[0], "calls[0]", 0)
    else:
        entry = CallFrame(caller=initiator, callee=initiator)
    for key in ("blockNumber", "chainId"):
        if not isinstance(doc.get(key, 0), int):
            raise ParseError(f"{key} must be an integer")
    return TransactionTrace(
        tx_hash=_hex(doc["txHash"], "txHash", 32),
        initiator=initiator,
        entry=entry,
        block_number=doc.get("blockNumber", 0),
        chain_id=doc.get("chainId", 1),
        annotations=doc.get("annotations") or {},
    )


def load_trace(path: str | os.PathLike) -> TransactionTrace:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return trace_from_dict(doc)


# --- serialization -------------------------------------------------------------


def _frame_to_dict(frame: CallFrame) -> dict:
    out = {
        "caller": str(frame.caller),
        "callee": str(frame.callee),
        "selector": frame.selector,
        "depth": frame.depth,
        "logs": [_log_to_dict(l) for l in frame.logs],
        "children": [_frame_to_dict(c) for c in frame.children],
    }
    if frame.call_type != "CALL":
        out["type"] = frame.call_type
    return out


def _log_to_dict(log: LogRecord) -> dict:
    out = {"address": str(log.address), "topics": list(log.topics), "data": log.data}
    if log.log_index is not None:
        out["logIndex"] = log.log_index
    return out


def trace_to_dict(trace: TransactionTrace) -> dict:
    doc = {
        "version": FIXTURE_VERSION,
        "txHash": trace.tx_hash,
        "chainId": trace.chain_id,
        "blockNumber": trace.block_number,
        "initiator": str(trace.initiator),
        "calls": [_frame_to_dict(trace.entry)],
    }
    if trace.annotations:
        doc["annotations"] = trace.annotations
    return doc


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def save_trace(trace: TransactionTrace, path: str | os.PathLike) -> None:
    atomic_write_text(path, json.dumps(trace_to_dict(trace), indent=2) + "\n")
