from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

from ..errors import MalformedLog
from .address import ZERO_ADDRESS, Address, check_u256, is_null
from .trace import LogRecord, TransactionTrace

log = logging.getLogger(__name__)

# keccak256("Transfer(address,address,uint256)")
TRANSFER_TOPIC = "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
# keccak256("Deposit(address,uint256)") / keccak256("Withdrawal(address,uint256)") as emitted by WETH9
WETH_DEPOSIT_TOPIC = "0xe1fffcc4923d04b559f4d29a8bfc6cda04eb5b0d3c460751c2402c5c5cc9109c"
WETH_WITHDRAWAL_TOPIC = "0x7fcf532c15f0a6db0bd6d0e038bea71d30d808c7d98cb3bf7268a95bf5081b65"

DEFAULT_WRAPPED_NATIVE = frozenset(
    {
        Address("0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2"),  # WETH (Ethereum)
        Address("0xbb4cdb9cbd36b01bd1cbaebf2de08d9173bc095c"),  # WBNB (BSC)
    }
)


class TransferKind(enum.Enum):
    TRANSFERRING = "Transferring"
    MINTING = "Minting"
    BURNING = "Burning"


@dataclass(frozen=True)
class TransferAction:
    sender: Address
    receiver: Address
    token: Address
    value: int
    kind: TransferKind
    # position in the transaction-wide emission order (0-based)
    seq: int = 0
    # callee of every frame enclosing the emitting log, outermost first
    call_path: tuple[Address, ...] = ()
    # pre-order ids of the same frames, used for invocation slicing
    frame_ids: tuple[int, ...] = ()

    def __post_init__(self):
        check_u256(self.value)
        expected = classify(self.sender, self.receiver)
        if expected is not self.kind:
            raise ValueError(f"{self.kind.value} transfer inconsistent with endpoints")


def classify(sender: Address, receiver: Address) -> TransferKind:
    s_null, r_null = is_null(sender), is_null(receiver)
    if s_null and r_null:
        raise MalformedLog("transfer between two null addresses")
    if s_null:
        return TransferKind.MINTING
    if r_null:
        return TransferKind.BURNING
    return TransferKind.TRANSFERRING


def _word_int(data: str) -> int:
    body = data[2:]
    if len(body) != 64:
        raise MalformedLog(f"expected one 32-byte data word, got {len(body) // 2} bytes")
    return int(body, 16)


def _decode_one(record: LogRecord, wrapped_native: frozenset[Address]):
    t0 = record.topic0
    if t0 == TRANSFER_TOPIC:
        if len(record.topics) != 3:
            raise MalformedLog(f"Transfer log with {len(record.topics)} topics at {record.address}")
        sender = Address.from_word(record.topics[1])
        receiver = Address.from_word(record.topics[2])
        return sender, receiver, _word_int(record.data)
    if record.address in wrapped_native and t0 in (WETH_DEPOSIT_TOPIC, WETH_WITHDRAWAL_TOPIC):
        if len(record.topics) != 2:
            raise MalformedLog(f"wrapped-native event with {len(record.topics)} topics")
        holder = Address.from_word(record.topics[1])
        value = _word_int(record.data)
        if t0 == WETH_DEPOSIT_TOPIC:
            return ZERO_ADDRESS, holder, value
        return holder, ZERO_ADDRESS, value
    return None


def decode_transfers(
    trace: TransactionTrace,
    *,
    wrapped_native: frozenset[Address] = DEFAULT_WRAPPED_NATIVE,
    warnings: list[str] | None = None,
) -> list[TransferAction]:
    """Decode ERC-20 Transfer logs (and wrapped-native deposit/withdrawal) in emission order.

    Malformed Transfer logs are skipped; a message is appended to ``warnings``.
    """
    frame_ids = {id(f): i for i, f in enumerate(trace.frames())}
    out: list[TransferAction] = []
    for record, stack in trace.emitted_logs():
        try:
            decoded = _decode_one(record, wrapped_native)
            if decoded is None:
                continue
            sender, receiver, value = decoded
            kind = classify(sender, receiver)
        except MalformedLog as exc:
            msg = f"MalformedLog: {exc}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            continue
        out.append(
            TransferAction(
                sender=sender,
                receiver=receiver,
                token=record.address,
                value=value,
                kind=kind,
                seq=len(out),
                call_path=tuple(f.callee for f in stack),
                frame_ids=tuple(frame_ids[id(f)] for f in stack),
            )
        )
    return out
