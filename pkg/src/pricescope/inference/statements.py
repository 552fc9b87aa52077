from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from ..chain.address import Address


class PriceDirection(enum.Enum):
    INCREASE = "Increase"
    DECREASE = "Decrease"

    @property
    def verb(self) -> str:
        return "increases" if self is PriceDirection.INCREASE else "decreases"

    @property
    def opposite(self) -> PriceDirection:
        return PriceDirection.DECREASE if self is PriceDirection.INCREASE else PriceDirection.INCREASE


class Backend(enum.Enum):
    ANALYTIC = "Analytic"
    LLM_TYPE1 = "LlmTypeI"
    LLM_TYPE2 = "LlmTypeII"


@dataclass(frozen=True)
class PriceStatement:
    token: Address
    contract: Address
    direction: PriceDirection
    text: str


@dataclass(frozen=True)
class ChangeDescription:
    token: Address
    contract: Address | None  # None means the token's total supply
    direction: PriceDirection
    magnitude: int
    rendered: str
    text: str

    def __post_init__(self):
        if self.magnitude <= 0:
            raise ValueError("change magnitude must be positive")


@dataclass(frozen=True)
class ScoredStatement:
    statement: PriceStatement
    score: int

    def __post_init__(self):
        if not 1 <= self.score <= 10:
            raise ValueError(f"score {self.score} outside 1..10")


@dataclass(frozen=True)
class PriceChangeVerdict:
    token: Address
    contract: Address
    direction: PriceDirection
    confidence: int
    backend: Backend
    # anchor: the price window whose balance changes produced the verdict, and the
    # transaction-wide emission indices of its first and last transfer
    window: int = -1
    start: int = 0
    end: int = 0

    def to_dict(self) -> dict:
        return {
            "token": self.token,
            "contract": self.contract,
            "direction": self.direction.value,
            "confidence": self.confidence,
            "backend": self.backend.value,
            "window": self.window,
            "start": self.start,
            "end": self.end,
        }


def statement_text(token_name: str, contract_name: str, direction: PriceDirection) -> str:
    return f"The price of {token_name} in {contract_name} {direction.verb} after change"


def generate_statements(
    tokens: Iterable[Address],
    contracts: Iterable[Address],
    names: dict[str, str] | None = None,
) -> list[PriceStatement]:
    """An Increase/Decrease statement pair for every (token, contract) combination."""
    names = names or {}
    out = []
    contracts = list(contracts)
    for token in tokens:
        for contract in contracts:
            for direction in (PriceDirection.INCREASE, PriceDirection.DECREASE):
                text = statement_text(
                    names.get(token) or token.short(), names.get(contract) or contract.short(), direction
                )
                out.append(PriceStatement(token, contract, direction, text))
    return out


def generate_pair_statements(pairs: Iterable[tuple[Address, Address]], names: dict[str, str] | None = None):
    out = []
    for token, contract in pairs:
        out.extend(generate_statements([token], [contract], names))
    return out


def balance_change(token, contract, delta: int, token_name: str, contract_name: str, rendered: str):
    direction = PriceDirection.INCREASE if delta > 0 else PriceDirection.DECREASE
    text = f"The balance of {token_name} in {contract_name} {direction.verb} by {rendered}"
    return ChangeDescription(token, contract, direction, abs(delta), rendered, text)


def supply_change(token, delta: int, token_name: str, rendered: str):
    direction = PriceDirection.INCREASE if delta > 0 else PriceDirection.DECREASE
    text = f"The total supply of {token_name} {direction.verb} by {rendered}"
    return ChangeDescription(token, None, direction, abs(delta), rendered, text)
