#!/usr/bin/env python3
"""Regenerate the hand-built trace fixtures under fixtures/.

Every fixture is a synthetic call tree written in the replay format. Pool
outputs are computed with the package's own AMM math from the declared
starting reserves, so the balances seen by the analytic backend are exactly
the ones a real pool would hold.

    python scripts/build_fixtures.py [--out fixtures]
"""
from __future__ import annotations

import argparse
import hashlib
import json
from pathlib import Path

from pricescope.amm.cpmm import CpmmPool, cpmm_swap_exact_in
from pricescope.amm.stableswap import StableswapPool, stableswap_swap
from pricescope.chain.address import ZERO_ADDRESS
from pricescope.chain.trace import atomic_write_text
from pricescope.chain.transfers import TRANSFER_TOPIC

E18 = 10**18

SEL = {
    "exploit": "0x4e487b71",
    "swap": "0x022c0d9f",
    "deposit": "0xe8eda9df",
    "withdraw": "0x69328dec",
    "borrow": "0xa415bcad",
    "stake": "0xa694fc3a",
    "claim": "0x4e71d92d",
    "flashLoan": "0x5cffe9de",
    "onFlashLoan": "0x23e30c8b",
    "mint": "0x40c10f19",
    "burn": "0x9dc29fac",
    "transfer": "0xa9059cbb",
    "transferFrom": "0x23b872dd",
    "aggregate": "0x12aa3caf",
    "pump": "0x1249c58b",
}


def addr(name: str) -> str:
    return "0x" + hashlib.sha256(name.encode()).hexdigest()[:40]


def word(value: int) -> str:
    return "0x" + format(value, "064x")


def topic_addr(a: str) -> str:
    return "0x" + a[2:].rjust(64, "0")


class TraceBuilder:
    """Tiny DSL for call trees with ERC-20 Transfer logs in emission order."""

    def __init__(self, name: str, *, initiator: str = "attacker", entry: str = "exploit"):
        self.name = name
        self.initiator = addr(f"{name}/{initiator}")
        self.uc = addr(f"{name}/{entry}")
        self.root = self._frame(self.initiator, self.uc, SEL["exploit"], 0)
        self.tokens: dict[str, dict] = {}
        self.labels: dict[str, str] = {self.uc: "Exploit"}
        self.models: list[dict] = []
        self.known: list[str] = []
        self._log_index = 0
        self._cpmm: dict[str, CpmmPool] = {}
        self._stable: dict[str, StableswapPool] = {}

    @staticmethod
    def _frame(caller, callee, selector, depth):
        return {"caller": caller, "callee": callee, "selector": selector, "depth": depth, "logs": [], "children": []}

    # -- naming -------------------------------------------------------------------

    def token(self, symbol: str, decimals: int = 18) -> str:
        a = addr(f"token/{symbol}")
        self.tokens[a] = {"symbol": symbol, "decimals": decimals}
        return a

    def contract(self, label: str) -> str:
        a = addr(f"{self.name}/contract/{label}")
        self.labels[a] = label
        return a

    # -- frames and transfers ---------------------------------------------------------

    def call(self, parent: dict, callee: str, selector: str = SEL["swap"]) -> dict:
        child = self._frame(parent["callee"], callee, selector, parent["depth"] + 1)
        parent["children"].append(child)
        return child

    def transfer(self, parent: dict, token: str, src: str, dst: str, value: int) -> dict:
        """Emit Transfer(src, dst, value) from a token frame called by ``parent``'s contract."""
        if src == ZERO_ADDRESS:
            selector = SEL["mint"]
        elif dst == ZERO_ADDRESS:
            selector = SEL["burn"]
        elif src == parent["callee"]:
            selector = SEL["transfer"]
        else:
            selector = SEL["transferFrom"]
        frame = self.call(parent, token, selector)
        frame["logs"].append(
            {
                "address": token,
                "topics": [TRANSFER_TOPIC, topic_addr(src), topic_addr(dst)],
                "data": word(value),
                "logIndex": self._log_index,
            }
        )
        self._log_index += 1
        if src in self._cpmm or dst in self._cpmm or src in self._stable or dst in self._stable:
            self._track(token, src, dst, value)
        return frame

    def _track(self, token, src, dst, value):
        for pool_addr, sign in ((src, -1), (dst, 1)):
            if pool_addr in self._cpmm:
                p = self._cpmm[pool_addr]
                if token == p.token_x:
                    self._cpmm[pool_addr] = CpmmPool(p.reserve_x + sign * value, p.reserve_y, p.token_x, p.token_y)
                elif token == p.token_y:
                    self._cpmm[pool_addr] = CpmmPool(p.reserve_x, p.reserve_y + sign * value, p.token_x, p.token_y)
            if pool_addr in self._stable:
                p = self._stable[pool_addr]
                if token in p.tokens:
                    r = list(p.reserves)
                    r[p.tokens.index(token)] += sign * value
                    self._stable[pool_addr] = StableswapPool(tuple(r), p.amp, p.tokens)

    # -- pools and models -----------------------------------------------------------

    def cpmm(self, label: str, tx: str, ty: str, rx: int, ry: int, *, model: bool = True) -> str:
        a = self.contract(label)
        self._cpmm[a] = CpmmPool(rx, ry, tx, ty)
        if model:
            self.models.append({"type": "cpmm", "address": a, "tokens": [tx, ty], "reserves": [str(rx), str(ry)]})
        return a

    def stableswap(self, label: str, tokens: list[str], reserves: list[int], amp: int) -> str:
        a = self.contract(label)
        self._stable[a] = StableswapPool(tuple(reserves), amp, tuple(tokens))
        self.models.append(
            {"type": "stableswap", "address": a, "tokens": tokens, "reserves": [str(r) for r in reserves], "amp": amp}
        )
        return a

    def feed(self, contract: str, prices: dict[str, list[dict]]):
        self.models.append({"type": "feed", "address": contract, "prices": prices})

    def vault_model(self, vault: str, asset: str, share: str, assets: int, supply: int):
        self.models.append(
            {"type": "vault", "address": vault, "asset": asset, "share": share, "assets": str(assets), "supply": str(supply)}
        )

    def quote(self, pool: str, token_in: str, amount: int) -> int:
        if pool in self._cpmm:
            out, _ = cpmm_swap_exact_in(self._cpmm[pool], token_in, amount)
            return out
        p = self._stable[pool]
        i = p.tokens.index(token_in)
        j = 1 if i == 0 else 0
        out, _ = stableswap_swap(p, i, j, amount)
        return out

    def other(self, pool: str, token: str, j: int | None = None) -> str:
        if pool in self._cpmm:
            p = self._cpmm[pool]
            return p.token_y if token == p.token_x else p.token_x
        p = self._stable[pool]
        i = p.tokens.index(token)
        return p.tokens[(1 if i == 0 else 0) if j is None else j]

    # -- operation shorthands (called from a UC frame) ----------------------------------------

    def swap(self, at: dict, pool: str, token_in: str, amount: int, *, payer: str | None = None) -> int:
        """The pool pulls ``token_in`` from the caller and pays the quoted output back."""
        payer = payer or at["callee"]
        token_out = self.other(pool, token_in)
        out = self.quote(pool, token_in, amount)
        f = self.call(at, pool, SEL["swap"])
        self.transfer(f, token_in, payer, pool, amount)
        self.transfer(f, token_out, pool, payer, out)
        return out

    def deposit(self, at: dict, market: str, asset: str, amount: int, proof: str, minted: int) -> dict:
        f = self.call(at, market, SEL["deposit"])
        self.transfer(f, asset, at["callee"], market, amount)
        self.transfer(f, proof, ZERO_ADDRESS, at["callee"], minted)
        return f

    def withdraw(self, at: dict, market: str, proof: str, burned: int, asset: str, amount: int) -> dict:
        f = self.call(at, market, SEL["withdraw"])
        self.transfer(f, proof, at["callee"], ZERO_ADDRESS, burned)
        self.transfer(f, asset, market, at["callee"], amount)
        return f

    def borrow(self, at: dict, market: str, debt: str, asset: str, amount: int) -> dict:
        f = self.call(at, market, SEL["borrow"])
        self.transfer(f, debt, ZERO_ADDRESS, at["callee"], amount)
        self.transfer(f, asset, market, at["callee"], amount)
        return f

    def stake(self, at: dict, pool: str, token: str, amount: int) -> dict:
        f = self.call(at, pool, SEL["stake"])
        self.transfer(f, token, at["callee"], pool, amount)
        return f

    def claim(self, at: dict, pool: str, token: str, amount: int) -> dict:
        f = self.call(at, pool, SEL["claim"])
        self.transfer(f, token, pool, at["callee"], amount)
        return f

    # -- output -------------------------------------------------------------------

    def to_dict(self, block: int = 19_000_000) -> dict:
        annotations = {"tokens": self.tokens, "labels": self.labels}
        if self.models:
            annotations["models"] = self.models
        if self.known:
            annotations["knownProtocols"] = self.known
        return {
            "version": 1,
            "txHash": "0x" + hashlib.sha256(f"tx/{self.name}".encode()).hexdigest(),
            "chainId": 1,
            "blockNumber": block,
            "initiator": self.initiator,
            "calls": [self.root],
            "annotations": annotations,
        }


# --- the figure-4 aggregator trade --------------------------------------------------------


def fig4() -> dict:
    """Aggregator trade: seven transfers, one swap UC→CA1→CA2→CA3→UC, plus unrelated hops."""
    b = TraceBuilder("fig4")
    t = [b.token(f"TK{i}") for i in range(1, 8)]
    ca = {i: b.contract(f"CA{i}") for i in range(1, 7)}
    agg = b.contract("Aggregator")
    b.known.append(agg)
    f = b.call(b.root, agg, SEL["aggregate"])
    b.transfer(f, t[0], b.uc, ca[1], 100 * E18)  # T1 pulled by the aggregator
    b.transfer(f, t[1], b.uc, ca[4], 5 * E18)  # T2 fee leg
    b.transfer(f, t[2], b.uc, ca[5], 7 * E18)  # T3
    hop1 = b.call(f, ca[1])
    b.transfer(hop1, t[3], ca[1], ca[2], 90 * E18)  # T4
    hop2 = b.call(f, ca[2])
    b.transfer(hop2, t[4], ca[2], ca[3], 80 * E18)  # T5
    hop3 = b.call(f, ca[5])
    b.transfer(hop3, t[5], ca[5], ca[6], 6 * E18)  # T6
    hop4 = b.call(f, ca[3])
    b.transfer(hop4, t[6], ca[3], b.uc, 70 * E18)  # T7
    return b.to_dict()


# --- the lending exploit reconstruction ---------------------------------------------------

UWU_SOURCE = """// SPDX-License-Identifier: MIT
pragma solidity ^0.8.0;

interface ICurvePool {
    function get_p(uint256 i) external view returns (uint256);
    function price_oracle(uint256 i) external view returns (uint256);
}

contract sUSDePriceProviderBUniCatch {
    ICurvePool[5] public pools;

    function deposit(address asset, uint256 amount, address onBehalfOf, uint16 referralCode) external {
        // collateral bookkeeping elided
    }

    function borrow(address asset, uint256 amount, uint256 interestRateMode, uint16 referralCode, address onBehalfOf) external {
        // "}" inside a string must not end the body
        require(amount > 0, "amount } zero");
    }

    function getPrice() external view returns (uint256) {
        (uint256[] memory prices, bool ok) = _getPrices(true);
        require(ok, "no quorum");
        return median(prices);
    }

    function _getPrices(bool sorted) internal view returns (uint256[] memory prices, bool ok) {
        prices = new uint256[](10);
        for (uint256 i = 0; i < 5; i++) {
            prices[i] = pools[i].get_p(0);          // instantaneous
            prices[i + 5] = pools[i].price_oracle(0); // EMA, fixed within a block
        }
        ok = true;
    }

    function median(uint256[] memory xs) internal pure returns (uint256) {
        uint256 n = xs.length;
        for (uint256 i = 0; i < n; i++) {
            for (uint256 j = i + 1; j < n; j++) {
                if (xs[j] < xs[i]) { (xs[i], xs[j]) = (xs[j], xs[i]); }
            }
        }
        return (xs[n / 2 - 1] + xs[n / 2]) / 2;
    }

    function setPools(ICurvePool[5] calldata p) external;
}
"""


def uwulend() -> tuple[dict, dict[str, dict]]:
    """Flash loan of USDe, sold into five stableswap pools, then WETH collateral and an sUSDe borrow."""
    b = TraceBuilder("uwulend")
    usde = b.token("USDe")
    susde = b.token("sUSDe")
    weth = b.token("WETH")
    uweth = b.token("uWETH")
    debt = b.token("variableDebtsUSDe")
    pairs = [b.token(s) for s in ("FRAX", "USDC", "DAI", "crvUSD", "GHO")]
    pools = [
        b.stableswap(f"Pool_{sym}USDe", [usde, other], [40_000_000 * E18, 40_000_000 * E18], 200)
        for sym, other in zip(("FRAX", "USDC", "DAI", "crvUSD", "GHO"), pairs)
    ]
    lender = b.contract("UwuLendingPool")
    flash = b.contract("FlashLender")
    ema = ["1.0004", "0.9997", "1.0001", "0.9999", "1.0002"]
    b.feed(lender, {susde: [{"model": p, "token": usde} for p in pools] + [{"const": c} for c in ema]})

    loan = 300_000_000 * E18
    f = b.call(b.root, flash, SEL["flashLoan"])
    b.transfer(f, usde, flash, b.uc, loan)
    cb = b.call(f, b.uc, SEL["onFlashLoan"])
    for pool in pools:
        b.swap(cb, pool, usde, 60_000_000 * E18)
    b.deposit(cb, lender, weth, 4_000 * E18, uweth, 4_000 * E18)
    b.borrow(cb, lender, debt, susde, 9_000_000 * E18)
    b.transfer(f, usde, b.uc, flash, loan)  # repayment pulled by the lender
    bundle = {"metadata.json": {"verified": True, "address": lender}, "sUSDePriceProviderBUniCatch.sol": UWU_SOURCE}
    return b.to_dict(block=20_061_319), {lender: bundle}


# --- one fixture per attack pattern ----------------------------------------------------------


def pattern_i() -> dict:
    """Buy y in P_buy, a protocol call pumps y in P_sell, sell y into P_sell."""
    b = TraceBuilder("pattern-i")
    x, y, z, w = (b.token(s) for s in ("BUSD", "ELEPHANT", "WBNB2", "TRUNK"))
    p_buy = b.cpmm("Pool_BUSD_ELEPHANT", x, y, 5_000_000 * E18, 5_000_000 * E18)
    p_sell = b.cpmm("Pool_ELEPHANT_WBNB2", y, z, 4_000_000 * E18, 20_000 * E18)
    treasury = b.contract("Treasury")
    got = b.swap(b.root, p_buy, x, 1_000_000 * E18)
    f = b.stake(b.root, treasury, w, 10_000 * E18)  # mint(): treasury buys y with its own z
    b.swap(f, p_sell, z, 8_000 * E18)
    b.swap(b.root, p_sell, y, got)
    return b.to_dict()


def pattern_ii() -> dict:
    """Price moves in P_buy first (reserves drained), then buy through P_buy and sell through P_sell."""
    b = TraceBuilder("pattern-ii")
    x, y, z = (b.token(s) for s in ("USDT", "BEAN", "WETH2"))
    p_buy = b.cpmm("Pool_USDT_BEAN", x, y, 2_000_000 * E18, 2_000_000 * E18)
    p_sell = b.cpmm("Pool_BEAN_WETH2", y, z, 3_000_000 * E18, 1_500 * E18)
    b.claim(b.root, p_buy, x, 1_500_000 * E18)
    got = b.swap(b.root, p_buy, x, 100_000 * E18)
    b.swap(b.root, p_sell, y, got)
    return b.to_dict()


def _lending_setup(b: TraceBuilder, priced: str, pool_other: str):
    lender = b.contract("LendingMarket")
    pool = b.cpmm(f"Pool_{b.tokens[pool_other]['symbol']}_{b.tokens[priced]['symbol']}", pool_other, priced,
                  1_000_000 * E18, 1_000_000 * E18)
    b.feed(lender, {priced: [{"model": pool, "token": priced}]})
    return lender, pool


def pattern_iii() -> dict:
    """Deposit collateral x, pump x in the market's oracle pool, borrow z."""
    b = TraceBuilder("pattern-iii")
    x, z, w = (b.token(s) for s in ("yUSD", "USDC2", "DAI2"))
    cx, dz = b.token("crYUSD"), b.token("debtUSDC2")
    lender, pool = _lending_setup(b, x, w)
    b.deposit(b.root, lender, x, 500_000 * E18, cx, 500_000 * E18)
    b.swap(b.root, pool, w, 400_000 * E18)
    b.borrow(b.root, lender, dz, z, 700_000 * E18)
    return b.to_dict()


def pattern_iv() -> dict:
    """Dump z into the oracle pool first, then deposit x and borrow the now-cheap z."""
    b = TraceBuilder("pattern-iv")
    x, z, w = (b.token(s) for s in ("WETH3", "sUSD", "USDT2"))
    cx, dz = b.token("aWETH3"), b.token("debtSUSD")
    lender, pool = _lending_setup(b, z, w)
    b.swap(b.root, pool, z, 600_000 * E18)
    b.deposit(b.root, lender, x, 100 * E18, cx, 100 * E18)
    b.borrow(b.root, lender, dz, z, 900_000 * E18)
    return b.to_dict()


def pattern_v() -> dict:
    """Stake x, depress the reward token's price in the reward contract, claim y."""
    b = TraceBuilder("pattern-v")
    x, y, w = (b.token(s) for s in ("LP", "ATK", "USDT3"))
    staking = b.contract("StakingPool")
    rewards = b.contract("RewardDistributor")
    pool = b.cpmm("Pool_ATK_USDT3", y, w, 1_000_000 * E18, 1_000_000 * E18)
    b.feed(rewards, {y: [{"model": pool, "token": y}]})
    b.stake(b.root, staking, x, 1_000 * E18)
    b.swap(b.root, pool, y, 800_000 * E18)
    b.claim(b.root, rewards, y, 2_000_000 * E18)
    return b.to_dict()


def pattern_vi() -> dict:
    """Depress y in the reward contract first, then stake and claim."""
    b = TraceBuilder("pattern-vi")
    x, y, w = (b.token(s) for s in ("LP2", "RWD", "USDT4"))
    staking = b.contract("StakingPool")
    rewards = b.contract("RewardDistributor")
    pool = b.cpmm("Pool_RWD_USDT4", y, w, 1_000_000 * E18, 1_000_000 * E18)
    b.feed(rewards, {y: [{"model": pool, "token": y}]})
    b.swap(b.root, pool, y, 800_000 * E18)
    b.stake(b.root, staking, x, 1_000 * E18)
    b.claim(b.root, rewards, y, 2_000_000 * E18)
    return b.to_dict()


def _vault_setup(b: TraceBuilder, share: str, u: str, w: str):
    vault = b.contract("Vault")
    pool = b.cpmm("Pool_USDT5_USDC5", w, u, 50_000_000 * E18, 50_000_000 * E18)
    b.feed(vault, {share: [{"model": pool, "token": u}]})
    return vault, pool


def pattern_vii() -> dict:
    """Deposit x for shares y, pump the pool the vault values itself by, withdraw x burning y."""
    b = TraceBuilder("pattern-vii")
    x, y = b.token("USDC6"), b.token("fUSDC")
    u, w = b.token("USDC5"), b.token("USDT5")
    vault, pool = _vault_setup(b, y, u, w)
    b.deposit(b.root, vault, x, 1_000_000 * E18, y, 980_000 * E18)
    b.swap(b.root, pool, w, 17_000_000 * E18)
    b.withdraw(b.root, vault, y, 980_000 * E18, x, 1_010_000 * E18)
    return b.to_dict()


def pattern_viii() -> dict:
    """Pump the vault's valuation pool first, then deposit and withdraw."""
    b = TraceBuilder("pattern-viii")
    x, y = b.token("USDC7"), b.token("fUSDC7")
    u, w = b.token("USDC5"), b.token("USDT5")
    vault, pool = _vault_setup(b, y, u, w)
    b.swap(b.root, pool, w, 17_000_000 * E18)
    b.deposit(b.root, vault, x, 1_000_000 * E18, y, 980_000 * E18)
    b.withdraw(b.root, vault, y, 980_000 * E18, x, 1_010_000 * E18)
    return b.to_dict()


# --- benign transactions --------------------------------------------------------------


def benign_single_swap() -> dict:
    b = TraceBuilder("benign-single-swap", entry="wallet")
    x, y = b.token("WETH"), b.token("USDC")
    pool = b.cpmm("Pool_WETH_USDC", x, y, 10_000 * E18, 25_000_000 * E18)
    b.swap(b.root, pool, x, 3 * E18)
    return b.to_dict()


def benign_deposit_withdraw() -> dict:
    b = TraceBuilder("benign-deposit-withdraw", entry="wallet")
    x, s = b.token("DAI"), b.token("yvDAI")
    vault = b.contract("Vault")
    b.vault_model(vault, x, s, 2_000_000 * E18, 1_600_000 * E18)
    b.deposit(b.root, vault, x, 50_000 * E18, s, 40_000 * E18)  # 5/4 per share
    b.withdraw(b.root, vault, s, 40_000 * E18, x, 50_000 * E18)
    return b.to_dict()


def benign_stake_only() -> dict:
    b = TraceBuilder("benign-stake-only", entry="wallet")
    x = b.token("CRV")
    gauge = b.contract("Gauge")
    b.stake(b.root, gauge, x, 12_345 * E18)
    return b.to_dict()


def benign_transfer_only() -> dict:
    b = TraceBuilder("benign-transfer-only", entry="wallet")
    x = b.token("USDC")
    friend = addr("benign-transfer-only/friend")
    f = b.call(b.root, x, SEL["transfer"])
    f["logs"].append(
        {
            "address": x,
            "topics": [TRANSFER_TOPIC, topic_addr(b.uc), topic_addr(friend)],
            "data": word(250 * E18),
            "logIndex": 0,
        }
    )
    return b.to_dict()


def benign_multihop() -> dict:
    b = TraceBuilder("benign-multihop", entry="wallet")
    x, y, z = b.token("WETH"), b.token("USDC"), b.token("DAI")
    p1 = b.cpmm("Pool_WETH_USDC", x, y, 10_000 * E18, 25_000_000 * E18)
    p2 = b.cpmm("Pool_USDC_DAI", y, z, 30_000_000 * E18, 30_000_000 * E18)
    router = b.contract("Router")
    b.known.append(router)
    f = b.call(b.root, router, SEL["aggregate"])
    amount = 2 * E18
    mid = b.quote(p1, x, amount)
    hop = b.call(f, p1, SEL["swap"])
    b.transfer(hop, x, b.uc, p1, amount)
    b.transfer(hop, y, p1, p2, mid)
    out = b.quote(p2, y, mid)
    hop2 = b.call(f, p2, SEL["swap"])
    b.transfer(hop2, z, p2, b.uc, out)
    return b.to_dict()


def benign_deposit_borrow() -> dict:
    b = TraceBuilder("benign-deposit-borrow", entry="wallet")
    x, z, w = b.token("WETH"), b.token("USDC"), b.token("USDT")
    ax, dz = b.token("aWETH"), b.token("debtUSDC")
    lender = b.contract("LendingMarket")
    pool = b.cpmm("Pool_USDT_USDC", w, z, 1_000_000 * E18, 1_000_000 * E18)
    b.feed(lender, {z: [{"model": pool, "token": z}], x: [{"const": "2500"}]})
    b.deposit(b.root, lender, x, 10 * E18, ax, 10 * E18)
    b.borrow(b.root, lender, dz, z, 12_000 * E18)
    return b.to_dict()


def benign_stake_claim() -> dict:
    b = TraceBuilder("benign-stake-claim", entry="wallet")
    x, y = b.token("LP"), b.token("RWD")
    staking = b.contract("StakingPool")
    b.feed(staking, {y: [{"const": "0.42"}, {"const": "0.41"}, {"const": "0.43"}]})
    b.stake(b.root, staking, x, 500 * E18)
    b.claim(b.root, staking, y, 37 * E18)
    return b.to_dict()


def benign_arbitrage() -> dict:
    b = TraceBuilder("benign-arbitrage", entry="searcher")
    x, y = b.token("WETH"), b.token("USDC")
    p1 = b.cpmm("Pool_A_WETH_USDC", x, y, 10_000 * E18, 24_000_000 * E18)
    p2 = b.cpmm("Pool_B_WETH_USDC", x, y, 10_000 * E18, 26_000_000 * E18)
    got = b.swap(b.root, p2, x, 20 * E18)
    b.swap(b.root, p1, y, got)
    return b.to_dict()


# --- swap search stress ------------------------------------------------------------------


def pathological(hubs: int = 14, rounds: int = 4) -> dict:
    """Dense relay mesh: every hub pays every other hub each round, so UC cycles explode."""
    b = TraceBuilder("pathological")
    tokens = [b.token(f"M{i}") for i in range(hubs)]
    nodes = [b.contract(f"Hub{i}") for i in range(hubs)]
    f = b.call(b.root, b.contract("Mesh"), SEL["aggregate"])
    for r in range(rounds):
        for i, src in enumerate(nodes):
            b.transfer(f, tokens[i], b.uc, src, E18 + r)
            for j, dst in enumerate(nodes):
                if i != j:
                    b.transfer(b.call(f, src), tokens[(i + j + r) % hubs], src, dst, E18)
            b.transfer(b.call(f, src), tokens[(i + 1) % hubs], src, b.uc, E18)
    return b.to_dict()


PATTERNS = {
    "I": pattern_i,
    "II": pattern_ii,
    "III": pattern_iii,
    "IV": pattern_iv,
    "V": pattern_v,
    "VI": pattern_vi,
    "VII": pattern_vii,
    "VIII": pattern_viii,
}
BENIGN = {
    "single_swap": benign_single_swap,
    "deposit_withdraw": benign_deposit_withdraw,
    "stake_only": benign_stake_only,
    "transfer_only": benign_transfer_only,
    "multihop_swap": benign_multihop,
    "deposit_borrow": benign_deposit_borrow,
    "stake_claim": benign_stake_claim,
    "arbitrage": benign_arbitrage,
}


def _write(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def build(out: Path):
    _write(out / "fig4.json", fig4())
    trace, bundles = uwulend()
    _write(out / "uwulend.json", trace)
    for contract, files in bundles.items():
        for name, body in files.items():
            target = out / "sources" / contract / name
            target.parent.mkdir(parents=True, exist_ok=True)
            atomic_write_text(target, json.dumps(body, indent=1) + "\n" if name.endswith(".json") else body)
    for pid, fn in PATTERNS.items():
        _write(out / "patterns" / f"pattern_{pid.lower()}.json", fn())
    for name, fn in BENIGN.items():
        _write(out / "benign" / f"{name}.json", fn())
    _write(out / "pathological.json", pathological())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args(argv)
    build(Path(args.out))
    print(f"fixtures written to {args.out}")


if __name__ == "__main__":
    main()
