from __future__ import annotations

from dataclasses import dataclass

from .address import Address


@dataclass(frozen=True)
class Token:
    address: Address
    symbol: str = ""
    decimals: int | None = None

    def __post_init__(self):
        if self.decimals is not None and not 0 <= self.decimals <= 77:
            raise ValueError(f"unsupported decimals {self.decimals} for {self.address}")

    @property
    def name(self) -> str:
        return self.symbol or self.address.short()


def format_amount(raw: int, decimals: int | None) -> str:
    """Render base units as a decimal string without going through floats."""
    sign = "-" if raw < 0 else ""
    raw = abs(raw)
    if not decimals:
        return f"{sign}{raw}"
    whole, frac = divmod(raw, 10**decimals)
    frac_s = str(frac).rjust(decimals, "0").rstrip("0")
    return f"{sign}{whole}.{frac_s}" if frac_s else f"{sign}{whole}"


class TokenRegistry:
    """Symbol/decimals lookup with a short-address fallback for unknown tokens."""

    def __init__(self, tokens: dict[Address, Token] | None = None):
        self._tokens = dict(tokens or {})

    @classmethod
    def from_annotations(cls, raw: dict) -> TokenRegistry:
        tokens = {}
        for addr, meta in (raw or {}).items():
            a = Address(addr)
            tokens[a] = Token(a, meta.get("symbol", ""), meta.get("decimals"))
        return cls(tokens)

    def get(self, address: Address) -> Token:
        return self._tokens.get(address) or Token(address)

    def name(self, address: Address) -> str:
        return self.get(address).name

    def render(self, address: Address, raw: int) -> str:
        return format_amount(raw, self.get(address).decimals)

    def __contains__(self, address) -> bool:
        return address in self._tokens
