from __future__ import annotations

from typing import Sequence

from ..amm.dataset import fill, load_template
from ..errors import NotTwoToken, TemplateError
from ..operations import PoolLabel
from .statements import ChangeDescription, PriceStatement


def _numbered(statements: Sequence[PriceStatement]) -> str:
    return "\n".join(f"Statement {i}: {s.text}." for i, s in enumerate(statements, start=1))


def _changes(changes: Sequence[ChangeDescription]) -> str:
    return "\n".join(c.text + "." for c in changes)


def _check_template(template: str, required: Sequence[str]):
    missing = [p for p in required if "{" + p + "}" not in template]
    if missing:
        raise TemplateError(f"template missing placeholder(s): {', '.join(missing)}")


def build_prompt_type1(
    code: str,
    statements: Sequence[PriceStatement],
    changes: Sequence[ChangeDescription],
    template: str | None = None,
) -> str:
    if not code.strip():
        raise TemplateError("Type-I prompt needs a non-empty code snippet")
    if not statements:
        raise TemplateError("Type-I prompt needs at least one statement pair")
    template = load_template("type1.txt") if template is None else template
    _check_template(template, ("code", "changes", "statements"))
    return fill(template, {"code": code, "changes": _changes(changes), "statements": _numbered(statements)})


def build_prompt_type2(
    pool: PoolLabel,
    statements: Sequence[PriceStatement],
    changes: Sequence[ChangeDescription],
    names: dict[str, str] | None = None,
    template: str | None = None,
) -> str:
    """Type-I with the code instruction swapped for a constant-product pool description."""
    if len(pool.tokens) != 2:
        raise NotTwoToken(f"{pool.address} trades {len(pool.tokens)} tokens")
    if not statements:
        raise TemplateError("Type-II prompt needs at least one statement pair")
    names = names or {}
    token_0, token_1 = sorted(pool.tokens)
    template = load_template("type2.txt") if template is None else template
    _check_template(template, ("pool_name", "token_0", "token_1", "changes", "statements"))
    return fill(
        template,
        {
            "pool_name": names.get(pool.address) or pool.address.short(),
            "token_0": names.get(token_0) or token_0.short(),
            "token_1": names.get(token_1) or token_1.short(),
            "changes": _changes(changes),
            "statements": _numbered(statements),
        },
    )
