from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from ..chain.address import Address, check_u256
from ..errors import InsufficientLiquidity, ZeroReserve

BPS = 10_000
DEFAULT_FEE_BPS = 30  # Uniswap V2


@dataclass(frozen=True)
class CpmmPool:
    reserve_x: int
    reserve_y: int
    token_x: Address
    token_y: Address
    fee_bps: int = DEFAULT_FEE_BPS

    def __post_init__(self):
        check_u256(self.reserve_x)
        check_u256(self.reserve_y)
        if not 0 <= self.fee_bps <= BPS:
            raise ValueError(f"fee_bps out of range: {self.fee_bps}")
        if self.token_x == self.token_y:
            raise ValueError("pool tokens must differ")

    @property
    def k(self) -> int:
        return self.reserve_x * self.reserve_y

    def reserve_of(self, token: Address) -> int:
        if token == self.token_x:
            return self.reserve_x
        if token == self.token_y:
            return self.reserve_y
        raise KeyError(token)


def cpmm_spot_price(pool: CpmmPool) -> Fraction:
    """Price of token_x denominated in token_y, y/x, as an exact fraction."""
    if pool.reserve_x == 0:
        raise ZeroReserve("reserve_x is zero")
    return Fraction(pool.reserve_y, pool.reserve_x)


def price_of(pool: CpmmPool, token: Address) -> Fraction:
    """Price of either pool token denominated in the other one."""
    if token == pool.token_x:
        return cpmm_spot_price(pool)
    if token == pool.token_y:
        if pool.reserve_y == 0:
            raise ZeroReserve("reserve_y is zero")
        return Fraction(pool.reserve_x, pool.reserve_y)
    raise KeyError(token)


def get_amount_out(amount_in: int, reserve_in: int, reserve_out: int, fee_bps: int = DEFAULT_FEE_BPS) -> int:
    if reserve_in == 0 or reserve_out == 0:
        raise ZeroReserve("empty reserve")
    in_with_fee = amount_in * (BPS - fee_bps)
    return (reserve_out * in_with_fee) // (reserve_in * BPS + in_with_fee)


def cpmm_swap_exact_in(pool: CpmmPool, token_in: Address, amount_in: int) -> tuple[int, CpmmPool]:
    """Sell ``amount_in`` of ``token_in``; the fee stays in the pool."""
    if amount_in <= 0:
        raise ValueError("amount_in must be positive")
    if token_in == pool.token_x:
        out = get_amount_out(amount_in, pool.reserve_x, pool.reserve_y, pool.fee_bps)
        new = replace(pool, reserve_x=pool.reserve_x + amount_in, reserve_y=pool.reserve_y - out)
    elif token_in == pool.token_y:
        out = get_amount_out(amount_in, pool.reserve_y, pool.reserve_x, pool.fee_bps)
        new = replace(pool, reserve_y=pool.reserve_y + amount_in, reserve_x=pool.reserve_x - out)
    else:
        raise ValueError(f"{token_in} is not a token of this pool")
    if out == 0:
        raise InsufficientLiquidity("swap would return zero")
    return out, new
