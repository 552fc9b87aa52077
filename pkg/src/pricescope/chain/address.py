from __future__ import annotations

import enum
import re

_HEX40 = re.compile(r"^(0x)?[0-9a-fA-F]{40}$")


class Address(str):
    """A 20-byte account address, always rendered as lowercase 0x-hex.

    Subclasses ``str`` so addresses can be used directly as dict keys and
    JSON values; parsing is case-insensitive.
    """

    __slots__ = ()

    def __new__(cls, value: str | bytes | Address) -> Address:
        if isinstance(value, Address):
            return value
        if isinstance(value, (bytes, bytearray)):
            if len(value) != 20:
                raise ValueError(f"address must be 20 bytes, got {len(value)}")
            return super().__new__(cls, "0x" + bytes(value).hex())
        if not isinstance(value, str) or not _HEX40.match(value):
            raise ValueError(f"not a 20-byte hex address: {value!r}")
        body = value[2:] if value[:2] in ("0x", "0X") else value
        return super().__new__(cls, "0x" + body.lower())

    @classmethod
    def from_word(cls, word: str | bytes) -> Address:
        """Take the low 20 bytes of a 32-byte ABI word (topic or data slot)."""
        if isinstance(word, str):
            word = bytes.fromhex(word[2:] if word.startswith("0x") else word)
        if len(word) != 32:
            raise ValueError("ABI word must be 32 bytes")
        return cls(word[12:])

    @property
    def bytes(self) -> bytes:
        return bytes.fromhex(self[2:])

    def short(self) -> str:
        return f"{self[:6]}…{self[-4:]}"

    def __repr__(self) -> str:
        return f"Address({str.__repr__(self)})"


ZERO_ADDRESS = Address("0x" + "00" * 20)
DEAD_ADDRESS = Address("0x000000000000000000000000000000000000dead")
NULL_ADDRESSES = frozenset({ZERO_ADDRESS, DEAD_ADDRESS})


class AccountKind(enum.Enum):
    EOA = "EOA"
    CONTRACT = "Contract"
    NULL = "Null"


def is_null(address: Address) -> bool:
    return address in NULL_ADDRESSES


def account_kind(address: Address, contracts: frozenset[Address] | set[Address] = frozenset()) -> AccountKind:
    if is_null(address):
        return AccountKind.NULL
    return AccountKind.CONTRACT if address in contracts else AccountKind.EOA


U256_MAX = (1 << 256) - 1


def check_u256(value: int) -> int:
    if not isinstance(value, int) or value < 0 or value > U256_MAX:
        raise ValueError(f"not a uint256: {value!r}")
    return value
