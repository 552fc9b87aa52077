"""Deterministic price-direction inference from pool math and replayed balances."""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union

from ..amm.cpmm import CpmmPool, price_of
from ..amm.stableswap import StableswapPool, marginal_price
from ..chain.address import ZERO_ADDRESS, Address, is_null
from ..chain.transfers import TransferAction
from ..errors import ZeroReserve
from .statements import Backend, PriceChangeVerdict, PriceDirection

ANALYTIC_CONFIDENCE = 10

Pool = Union[CpmmPool, StableswapPool]


def _pool_prices(pool: Pool) -> dict[Address, Fraction]:
    if isinstance(pool, CpmmPool):
        return {pool.token_x: price_of(pool, pool.token_x), pool.token_y: price_of(pool, pool.token_y)}
    tokens = pool.tokens or tuple(range(pool.n))  # untokened pools are keyed by index
    return {tokens[i]: marginal_price(pool, i) for i in range(pool.n)}


def _pool_tokens(pool: Pool) -> frozenset:
    if isinstance(pool, CpmmPool):
        return frozenset((pool.token_x, pool.token_y))
    return frozenset(pool.tokens or range(pool.n))


def compare_prices(
    before: dict, after: dict, contract: Address, backend: Backend = Backend.ANALYTIC, **anchor
) -> list[PriceChangeVerdict]:
    out = []
    for token in sorted(before):
        if token not in after or after[token] == before[token]:
            continue
        direction = PriceDirection.INCREASE if after[token] > before[token] else PriceDirection.DECREASE
        out.append(PriceChangeVerdict(token, contract, direction, ANALYTIC_CONFIDENCE, backend, **anchor))
    return out


def analytic_infer(before: Pool, after: Pool, contract: Address = ZERO_ADDRESS, **anchor) -> list[PriceChangeVerdict]:
    """Verdicts for every pool token whose price moved between two states.

    CPMM prices are compared as exact y/x fractions; stableswap prices come
    from a probe swap at each state.
    """
    if type(before) is not type(after) or _pool_tokens(before) != _pool_tokens(after):
        raise ValueError("before/after states must describe the same pool")
    return compare_prices(_pool_prices(before), _pool_prices(after), contract, **anchor)


# --- configured models, replayed over the transaction's transfers -------------------

Balances = dict  # (account, token) -> int, plus (None, token) -> total supply


@dataclass
class CpmmModel:
    address: Address
    tokens: tuple[Address, Address]
    reserves: tuple[int, int]
    fee_bps: int = 30

    def tracked(self):
        return {(self.address, t): r for t, r in zip(self.tokens, self.reserves)}

    def pool(self, bal: Balances) -> CpmmPool:
        x, y = self.tokens
        return CpmmPool(bal[(self.address, x)], bal[(self.address, y)], x, y, self.fee_bps)

    def prices(self, bal: Balances, models) -> dict[Address, Fraction]:
        return _pool_prices(self.pool(bal))


@dataclass
class StableswapModel:
    address: Address
    tokens: tuple[Address, ...]
    reserves: tuple[int, ...]
    amp: int

    def tracked(self):
        return {(self.address, t): r for t, r in zip(self.tokens, self.reserves)}

    def pool(self, bal: Balances) -> StableswapPool:
        return StableswapPool(tuple(bal[(self.address, t)] for t in self.tokens), self.amp, self.tokens)

    def prices(self, bal: Balances, models) -> dict[Address, Fraction]:
        return _pool_prices(self.pool(bal))


@dataclass
class VaultModel:
    """Share price = assets held / shares outstanding."""

    address: Address
    asset: Address
    share: Address
    assets: int
    supply: int

    def tracked(self):
        return {(self.address, self.asset): self.assets, (None, self.share): self.supply}

    def prices(self, bal: Balances, models) -> dict[Address, Fraction]:
        assets, supply = bal[(self.address, self.asset)], bal[(None, self.share)]
        if assets == 0 or supply == 0:
            raise ZeroReserve(f"vault {self.address} is empty")
        return {self.share: Fraction(assets, supply), self.asset: Fraction(supply, assets)}


@dataclass
class FeedModel:
    """Oracle-style price: median over pool prices and in-block constants."""

    address: Address
    feeds: dict[Address, list[dict]] = field(default_factory=dict)

    def tracked(self):
        return {}

    def prices(self, bal: Balances, models) -> dict[Address, Fraction]:
        out = {}
        for token, inputs in self.feeds.items():
            values = []
            for spec in inputs:
                if "const" in spec:
                    values.append(Fraction(str(spec["const"])))
                else:
                    source = models[Address(spec["model"])]
                    values.append(source.prices(bal, models)[Address(spec["token"])])
            out[token] = statistics.median(values)
        return out


Model = Union[CpmmModel, StableswapModel, VaultModel, FeedModel]


def model_from_dict(raw: dict) -> Model:
    kind = raw.get("type")
    address = Address(raw["address"])
    if kind == "cpmm":
        tokens = tuple(Address(t) for t in raw["tokens"])
        if len(tokens) != 2:
            raise ValueError("cpmm model needs exactly two tokens")
        return CpmmModel(address, tokens, tuple(int(r) for r in raw["reserves"]), int(raw.get("feeBps", 30)))
    if kind == "stableswap":
        return StableswapModel(
            address, tuple(Address(t) for t in raw["tokens"]), tuple(int(r) for r in raw["reserves"]), int(raw["amp"])
        )
    if kind == "vault":
        return VaultModel(address, Address(raw["asset"]), Address(raw["share"]), int(raw["assets"]), int(raw["supply"]))
    if kind == "feed":
        return FeedModel(address, {Address(t): list(v) for t, v in raw["prices"].items()})
    raise ValueError(f"unknown price model type {kind!r}")


def load_models(raw: Iterable[dict]) -> dict[Address, Model]:
    models = {}
    for item in raw or ():
        m = model_from_dict(item)
        models[m.address] = m
    return models


def initial_balances(models: dict[Address, Model]) -> Balances:
    bal: Balances = {}
    for m in models.values():
        bal.update(m.tracked())
    return bal


def apply_transfer(bal: Balances, t: TransferAction) -> None:
    """Apply one transfer to the tracked balances in place."""
    if (t.sender, t.token) in bal:
        bal[(t.sender, t.token)] -= t.value
    if (t.receiver, t.token) in bal:
        bal[(t.receiver, t.token)] += t.value
    if (None, t.token) in bal:
        if is_null(t.sender):
            bal[(None, t.token)] += t.value
        elif is_null(t.receiver):
            bal[(None, t.token)] -= t.value


def model_verdicts(
    model: Model, models: dict[Address, Model], before: Balances, after: Balances, **anchor
) -> list[PriceChangeVerdict]:
    if isinstance(model, (CpmmModel, StableswapModel)):
        return analytic_infer(model.pool(before), model.pool(after), model.address, **anchor)
    return compare_prices(model.prices(before, models), model.prices(after, models), model.address, **anchor)
