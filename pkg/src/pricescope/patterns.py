"""The eight ordered operation + price-change templates and their matcher."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .chain.address import Address
from .inference.statements import PriceChangeVerdict, PriceDirection
from .operations import DeFiOperation, OpKind

DEFAULT_MIN_CONFIDENCE = 6

INC, DEC = PriceDirection.INCREASE, PriceDirection.DECREASE


class Family(enum.Enum):
    BUY_SELL = "BuySell"
    DEPOSIT_BORROW = "DepositBorrow"
    STAKE_CLAIM = "StakeClaim"
    DEPOSIT_WITHDRAW = "DepositWithdraw"


class AttackPattern(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"
    VII = "VII"
    VIII = "VIII"

    @property
    def family(self) -> Family:
        return _FAMILY[self]

    @property
    def verdict_first(self) -> bool:
        """Even-numbered patterns move the price before the first operation."""
        return self in (AttackPattern.II, AttackPattern.IV, AttackPattern.VI, AttackPattern.VIII)


_FAMILY = {
    AttackPattern.I: Family.BUY_SELL,
    AttackPattern.II: Family.BUY_SELL,
    AttackPattern.III: Family.DEPOSIT_BORROW,
    AttackPattern.IV: Family.DEPOSIT_BORROW,
    AttackPattern.V: Family.STAKE_CLAIM,
    AttackPattern.VI: Family.STAKE_CLAIM,
    AttackPattern.VII: Family.DEPOSIT_WITHDRAW,
    AttackPattern.VIII: Family.DEPOSIT_WITHDRAW,
}
ORDER = {p: i for i, p in enumerate(AttackPattern)}


@dataclass(frozen=True)
class AttackFinding:
    pattern: AttackPattern
    operations: tuple[DeFiOperation, ...]
    verdicts: tuple[PriceChangeVerdict, ...]
    invocation_index: int
    narrative: str

    @property
    def family(self) -> Family:
        return self.pattern.family

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.value,
            "family": self.family.value,
            "invocationIndex": self.invocation_index,
            "operations": [op.to_dict() for op in self.operations],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "narrative": self.narrative,
        }


# A clause is (token, contract, direction); a template yields, for a bound
# operation pair, the alternative clauses any one of which completes it.
Clause = tuple[Address, Address, PriceDirection]


def _buy_sell(a: DeFiOperation, b: DeFiOperation, before: bool) -> list[Clause] | None:
    if a.kind is not OpKind.SWAP or b.kind is not OpKind.SWAP or b.token_in != a.token_out:
        return None
    x, y, z = a.token_in, a.token_out, b.token_out
    clauses = [(y, p, INC) for p in b.contracts] + [(z, p, DEC) for p in b.contracts]
    if before:
        clauses += [(x, p, INC) for p in a.contracts] + [(y, p, DEC) for p in a.contracts]
    return clauses


def _deposit_borrow(a, b, before: bool) -> list[Clause] | None:
    if a.kind is not OpKind.DEPOSIT or b.kind is not OpKind.BORROW:
        return None
    c = b.contract
    return [(a.token_in, c, INC), (b.token_out, c, DEC)]


def _stake_claim(a, b, before: bool) -> list[Clause] | None:
    if a.kind is not OpKind.STAKE or b.kind is not OpKind.CLAIM:
        return None
    clauses = [(b.token_out, b.contract, DEC)]
    if before:
        clauses.append((a.token_in, a.contract, INC))
    return clauses


def _deposit_withdraw(a, b, before: bool) -> list[Clause] | None:
    if a.kind is not OpKind.DEPOSIT or b.kind is not OpKind.WITHDRAW or a.token_proof != b.token_proof:
        return None
    y, cw = a.token_proof, b.contract
    clauses = [(y, cw, INC), (b.token_out, cw, DEC)]
    if before:
        clauses += [(a.token_in, a.contract, INC), (y, a.contract, DEC)]
    return clauses


TEMPLATES: dict[AttackPattern, Callable] = {
    AttackPattern.I: _buy_sell,
    AttackPattern.II: _buy_sell,
    AttackPattern.III: _deposit_borrow,
    AttackPattern.IV: _deposit_borrow,
    AttackPattern.V: _stake_claim,
    AttackPattern.VI: _stake_claim,
    AttackPattern.VII: _deposit_withdraw,
    AttackPattern.VIII: _deposit_withdraw,
}


def _placed(v: PriceChangeVerdict, a: DeFiOperation, b: DeFiOperation, before: bool) -> bool:
    if before:
        return v.end < a.start
    return v.start >= a.start and v.end < b.start


def _name(names, addr) -> str:
    return names.get(addr) or addr.short()


def _describe(op: DeFiOperation, names) -> str:
    n = lambda a: _name(names, a)  # noqa: E731
    via = ", ".join(n(c) for c in op.contracts)
    if op.kind is OpKind.SWAP:
        return f"swap {n(op.token_in)} to {n(op.token_out)} through {via}"
    if op.kind is OpKind.DEPOSIT:
        return f"deposit {n(op.token_in)} into {via} for {n(op.token_proof)}"
    if op.kind is OpKind.WITHDRAW:
        return f"withdraw {n(op.token_out)} from {via} burning {n(op.token_proof)}"
    if op.kind is OpKind.BORROW:
        return f"borrow {n(op.token_out)} from {via}"
    if op.kind is OpKind.STAKE:
        return f"stake {n(op.token_in)} into {via}"
    return f"claim {n(op.token_out)} from {via}"


def _narrative(pattern, a, b, verdicts, names) -> str:
    price = "; ".join(
        f"price of {_name(names, v.token)} in {_name(names, v.contract)} {v.direction.verb}" for v in verdicts
    )
    steps = [_describe(a, names), _describe(b, names)]
    if pattern.verdict_first:
        steps.insert(0, price)
    else:
        steps.insert(1, price)
    return f"Pattern {pattern.value}: " + ", then ".join(steps)


def match_patterns(
    ops: Sequence[DeFiOperation],
    verdicts: Iterable[PriceChangeVerdict],
    *,
    min_confidence: int = DEFAULT_MIN_CONFIDENCE,
    names: dict | None = None,
) -> list[AttackFinding]:
    """Check every ordered operation pair against all eight templates.

    A pair yields one finding per pattern when at least one verdict with
    enough confidence matches one of the template's price clauses and sits
    in the right place in time; every such witness is listed.
    """
    names = names or {}
    usable = [v for v in verdicts if v.confidence >= min_confidence]
    ordered = sorted(ops, key=lambda op: (op.start, op.end))
    findings = []
    for pattern, template in TEMPLATES.items():
        before = pattern.verdict_first
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                if not a.start < b.start:
                    continue
                clauses = template(a, b, before)
                if not clauses:
                    continue
                wanted = set(clauses)
                witnesses = tuple(
                    v for v in usable if (v.token, v.contract, v.direction) in wanted and _placed(v, a, b, before)
                )
                if witnesses:
                    findings.append(
                        AttackFinding(pattern, (a, b), witnesses, a.invocation, _narrative(pattern, a, b, witnesses, names))
                    )
    findings.sort(key=lambda f: (ORDER[f.pattern], f.operations[0].start, f.operations[1].start))
    return findings
