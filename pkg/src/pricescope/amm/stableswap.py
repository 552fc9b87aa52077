"""Stableswap invariant on integers.

In the form used here (``a`` is the amplification coefficient, S = Σx, P = Πx):

    a·nⁿ·S + D = a·nⁿ·D + D^(n+1) / (nⁿ·P)

D is returned as the floor of the exact root, and swap outputs are rounded
in the pool's favour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from ..chain.address import Address, check_u256
from ..errors import InsufficientLiquidity, NoConvergence, ZeroReserve

MAX_ITERATIONS = 256


@dataclass(frozen=True)
class StableswapPool:
    reserves: tuple[int, ...]
    amp: int
    tokens: tuple[Address, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reserves", tuple(self.reserves))
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.reserves) < 2:
            raise ValueError("stableswap pool needs at least two tokens")
        if self.tokens and len(self.tokens) != len(self.reserves):
            raise ValueError("tokens and reserves length differ")
        if self.amp <= 0:
            raise ValueError("amp must be positive")
        for r in self.reserves:
            check_u256(r)

    @property
    def n(self) -> int:
        return len(self.reserves)

    def index_of(self, token: Address) -> int:
        return self.tokens.index(token)


def _g(d: int, reserves: tuple[int, ...], amp: int) -> int:
    """nⁿ·P times the invariant residual at D; positive iff D is below the root."""
    n = len(reserves)
    nn = n**n
    ann = amp * nn
    return (ann * sum(reserves) + d - ann * d) * nn * math.prod(reserves) - d ** (n + 1)


def invariant_residual(reserves, amp: int, d) -> Fraction:
    """Relative residual |lhs − rhs| / rhs of the invariant written with χ = a·P/(D/n)ⁿ."""
    n = len(reserves)
    d = Fraction(d)
    p = Fraction(math.prod(reserves))
    chi = amp * p / (d / n) ** n
    lhs = chi * d ** (n - 1) * sum(reserves) + p
    rhs = chi * d**n + d**n / Fraction(n**n)
    return abs(lhs - rhs) / rhs


def _bisect_floor_root(fn, lo: int, hi: int) -> int:
    """Largest integer in [lo, hi] with fn >= 0, given fn decreasing and fn(lo) >= 0."""
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fn(mid) >= 0:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _polish_floor(fn, x: int, lo: int, hi: int) -> int:
    for _ in range(8):
        if fn(x) < 0:
            x -= 1
        elif x < hi and fn(x + 1) >= 0:
            x += 1
        else:
            return x
    return _bisect_floor_root(fn, lo, hi)


def _check_reserves(pool: StableswapPool):
    if any(r == 0 for r in pool.reserves):
        raise ZeroReserve("stableswap reserve is zero")


def newton_D(pool: StableswapPool) -> int:
    """Integer Newton iteration for D as deployed on-chain; may sit a unit off the exact root."""
    _check_reserves(pool)
    reserves, n = pool.reserves, pool.n
    s = sum(reserves)
    ann = pool.amp * n**n
    nn_p = n**n * math.prod(reserves)
    d = s
    for _ in range(MAX_ITERATIONS):
        d_p = d ** (n + 1) // nn_p
        prev = d
        d = (ann * s + d_p * n) * d // ((ann - 1) * d + (n + 1) * d_p)
        if abs(d - prev) <= 1:
            return d
    raise NoConvergence(f"D did not converge in {MAX_ITERATIONS} iterations")


def bisect_D(pool: StableswapPool) -> int:
    """Floor of the exact root by bisection on [0, Σx]; slow but independent of Newton."""
    _check_reserves(pool)
    return _bisect_floor_root(lambda x: _g(x, pool.reserves, pool.amp), 0, sum(pool.reserves))


def stableswap_solve_D(pool: StableswapPool) -> int:
    """Floor of the exact invariant root: Newton, then settled by exact sign checks."""
    d = newton_D(pool)
    s = sum(pool.reserves)
    return _polish_floor(lambda x: _g(x, pool.reserves, pool.amp), min(d, s), 0, s)


def _k(y: int, d: int, others: list[int], amp: int, n: int) -> int:
    """nⁿ·P·y times the invariant residual with one reserve set to y; increasing in y."""
    nn = n**n
    ann = amp * nn
    p = math.prod(others)
    return (ann * (sum(others) + y) + d - ann * d) * nn * p * y - d ** (n + 1)


def solve_y(pool: StableswapPool, i: int, j: int, new_xi: int, d: int | None = None) -> int:
    """Smallest integer reserve for token j keeping the invariant at D after x_i := new_xi."""
    n = pool.n
    if d is None:
        d = stableswap_solve_D(pool)
    others = [new_xi if k == i else x for k, x in enumerate(pool.reserves) if k != j]
    ann = pool.amp * n**n
    c = d
    for x in others:
        c = c * d // (x * n)
    c = c * d // (ann * n)
    b = sum(others) + d // ann
    y = d
    for _ in range(MAX_ITERATIONS):
        prev = y
        y = (y * y + c) // (2 * y + b - d)
        if abs(y - prev) <= 1:
            break
    else:
        raise NoConvergence(f"y did not converge in {MAX_ITERATIONS} iterations")
    fn = lambda v: -_k(v, d, others, pool.amp, n)  # decreasing form for the shared helpers
    upper = max(y, d) + 2
    while _k(upper, d, others, pool.amp, n) <= 0:  # Newton's y is not a bound by itself
        upper *= 2
    y_floor = _polish_floor(fn, y, 0, upper)  # largest y with K(y) <= 0
    return y_floor if _k(y_floor, d, others, pool.amp, n) == 0 else y_floor + 1


def stableswap_swap(pool: StableswapPool, i: int, j: int, dx: int) -> tuple[int, StableswapPool]:
    if i == j:
        raise ValueError("i and j must differ")
    if dx <= 0:
        raise ValueError("dx must be positive")
    d = stableswap_solve_D(pool)
    new_xi = pool.reserves[i] + dx
    y = solve_y(pool, i, j, new_xi, d)
    dy = pool.reserves[j] - y
    if dy <= 0:
        raise InsufficientLiquidity("swap would return nothing")
    reserves = list(pool.reserves)
    reserves[i], reserves[j] = new_xi, y
    return dy, replace(pool, reserves=tuple(reserves))


PROBE_DIGITS = 36


def marginal_price(pool: StableswapPool, i: int, j: int | None = None) -> Fraction:
    """Units of token j received per unit of token i for a small probe trade.

    The invariant is homogeneous of degree one, so reserves are scaled up
    first to keep integer rounding out of the probe.
    """
    if j is None:
        j = 1 if i == 0 else 0
    smallest = min(pool.reserves)
    if smallest == 0:
        raise ZeroReserve("stableswap reserve is zero")
    scale = 10 ** max(0, PROBE_DIGITS - len(str(smallest)))
    scaled = replace(pool, reserves=tuple(r * scale for r in pool.reserves))
    dx = max(1, scaled.reserves[i] // 10**9)
    dy, _ = stableswap_swap(scaled, i, j, dx)
    return Fraction(dy, dx)
