"""Synthetic CPMM balance-change pairs and the chat-format fine-tuning file built from them."""
from __future__ import annotations

import enum
import json
import os
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..chain.address import Address
from ..chain.tokens import format_amount
from ..chain.trace import atomic_write_text
from ..errors import TemplateError
from .cpmm import CpmmPool, cpmm_swap_exact_in

BTC20 = Address("0xe86df1970055e9caee93dae9b7d5fd71595d0e18")
WETH = Address("0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2")

# Fixed stand-in for the forked Uniswap V2 BTC20/WETH pair.
DEFAULT_POOL = CpmmPool(
    reserve_x=2_500_000 * 10**18,
    reserve_y=1_200 * 10**18,
    token_x=BTC20,
    token_y=WETH,
)
DEFAULT_RANGE = (10**20, 10**21)
HIGH_SCORE, LOW_SCORE = 9, 2
REQUIRED_PLACEHOLDERS = ("code", "value_0", "value_1", "direction of change", "score")


class Direction(enum.Enum):
    INFLATE = "Inflate"
    DEFLATE = "Deflate"


@dataclass(frozen=True)
class BalancePair:
    """Pool-side balance changes (after − before) of one simulated swap.

    ``direction`` refers to the price of token_y.
    """

    delta_x: int
    delta_y: int
    direction: Direction

    def __post_init__(self):
        if self.delta_x == 0 or self.delta_y == 0:
            raise ValueError("balance changes must be nonzero")
        if (self.delta_x > 0) == (self.delta_y > 0):
            raise ValueError("balance changes must have opposite signs")


def generate_finetune_pairs(
    pool: CpmmPool = DEFAULT_POOL,
    count: int = 1000,
    seed: int = 0,
    amount_range: tuple[int, int] = DEFAULT_RANGE,
) -> list[BalancePair]:
    """Simulate ``count`` swaps against the same starting pool state.

    Half sell token_x for token_y (the price of token_y inflates), half sell
    token_y (it deflates). Amounts are uniform integers over ``amount_range``.
    """
    lo, hi = amount_range
    if count <= 0:
        raise ValueError("count must be positive")
    if not 0 <= lo < hi < 1 << 256:
        raise ValueError("amount range must satisfy 0 <= lo < hi < 2**256")
    rng = random.Random(seed)
    n_deflate = count // 2
    plan = [Direction.INFLATE] * (count - n_deflate) + [Direction.DEFLATE] * n_deflate
    rng.shuffle(plan)
    pairs = []
    for direction in plan:
        amount = rng.randint(lo, hi)
        token_in = pool.token_x if direction is Direction.INFLATE else pool.token_y
        _, after = cpmm_swap_exact_in(pool, token_in, amount)
        pairs.append(
            BalancePair(
                delta_x=after.reserve_x - pool.reserve_x,
                delta_y=after.reserve_y - pool.reserve_y,
                direction=direction,
            )
        )
    return pairs


# --- templates -----------------------------------------------------------------------

_PLACEHOLDER = re.compile(r"\{([a-z_0-9 ]+)\}")
_SECTION = re.compile(r"^### (system|user|assistant)\s*$", re.MULTILINE)


def load_template(name: str) -> str:
    return resources.files("pricescope.templates").joinpath(name).read_text(encoding="utf-8")


def fill(template: str, values: dict[str, object]) -> str:
    """Substitute ``{name}`` placeholders in one pass.

    A list value is consumed one item per occurrence, in order; unknown
    names are left untouched so literal braces survive.
    """
    cursors = {k: iter(v) for k, v in values.items() if isinstance(v, list)}

    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key in cursors:
            try:
                return str(next(cursors[key]))
            except StopIteration:
                raise TemplateError(f"not enough values for {{{key}}}") from None
        if key in values:
            return str(values[key])
        return m.group(0)

    return _PLACEHOLDER.sub(sub, template)


def split_sections(template: str) -> list[tuple[str, str]]:
    parts = _SECTION.split(template)
    if len(parts) < 3:
        raise TemplateError("template needs '### user' and '### assistant' sections")
    return [(role, body.strip("\n")) for role, body in zip(parts[1::2], parts[2::2])]


def _direction_word(value: int) -> str:
    return "increases" if value > 0 else "decreases"


def _scores(pair: BalancePair) -> list[int]:
    # statements in template order: token_0 up, token_0 down, token_1 up, token_1 down
    y_up = pair.direction is Direction.INFLATE
    hi, lo = HIGH_SCORE, LOW_SCORE
    return [hi if y_up else lo, lo if y_up else hi, lo if y_up else hi, hi if y_up else lo]


def render_example(
    pair: BalancePair, template: str, *, code: str, token_0: str, token_1: str, decimals: int | None = 18
) -> dict:
    """One chat-format record. value_0 belongs to token_y, value_1 to token_x."""
    missing = [p for p in REQUIRED_PLACEHOLDERS if "{" + p + "}" not in template]
    if missing:
        raise TemplateError(f"template missing placeholder(s): {', '.join(missing)}")
    values = {
        "code": code,
        "token_0": token_0,
        "token_1": token_1,
        "value_0": format_amount(abs(pair.delta_y), decimals),
        "value_1": format_amount(abs(pair.delta_x), decimals),
        "direction of change": [_direction_word(pair.delta_y), _direction_word(pair.delta_x)],
        "score": _scores(pair),
    }
    messages = []
    for role, body in split_sections(template):
        messages.append({"role": role, "content": fill(body, values)})
    return {"messages": messages}


def emit_finetune_jsonl(
    pairs: list[BalancePair],
    template: str,
    path: str | os.PathLike,
    *,
    code: str | None = None,
    token_0: str = "WETH",
    token_1: str = "BTC20",
) -> Path:
    if code is None:
        code = load_template("cpmm_code.sol").strip()
    lines = [json.dumps(render_example(p, template, code=code, token_0=token_0, token_1=token_1), ensure_ascii=False) for p in pairs]
    if not pairs:
        missing = [p for p in REQUIRED_PLACEHOLDERS if "{" + p + "}" not in template]
        if missing:
            raise TemplateError(f"template missing placeholder(s): {', '.join(missing)}")
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return Path(path)


def split_train_validation(items: list, train_fraction: float = 0.83) -> tuple[list, list]:
    cut = round(len(items) * train_fraction)
    return items[:cut], items[cut:]


def sample_pairs(pairs: list[BalancePair], k: int, seed: int = 0) -> list[BalancePair]:
    return random.Random(seed).sample(pairs, k)
