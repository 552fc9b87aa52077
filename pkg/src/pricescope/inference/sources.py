"""Verified-source bundles and signature-based extraction of price functions."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from Crypto.Hash import keccak

from ..chain.address import Address
from ..errors import NoSource

DEFAULT_SIGNATURES = frozenset(
    {"price", "getPrice", "latestAnswer", "getReserves", "exchangeRate", "convertTo", "rate", "oracle"}
)

_FUNCTION = re.compile(r"\bfunction\s+([A-Za-z_$][A-Za-z0-9_$]*)\s*\(")
_WORDS = re.compile(r"[A-Z]+(?=[A-Z][a-z]|\d|\b|_)|[A-Z]?[a-z]+|[A-Z]+|\d+")


@dataclass(frozen=True)
class SourceBundle:
    contract: Address
    files: dict[str, str] = field(default_factory=dict, hash=False)
    verified: bool = False

    def __post_init__(self):
        if not self.verified and self.files:
            raise ValueError("an unverified bundle cannot carry sources")


def load_bundle(directory: str | Path) -> SourceBundle:
    directory = Path(directory)
    meta_path = directory / "metadata.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    verified = bool(meta.get("verified", False))
    files = {}
    if verified:
        for path in sorted(directory.rglob("*")):
            if path.is_file() and path.name != "metadata.json":
                files[str(path.relative_to(directory))] = path.read_text(encoding="utf-8")
    return SourceBundle(Address(meta.get("address", directory.name)), files, verified)


def load_bundles(root: str | Path) -> dict[Address, SourceBundle]:
    root = Path(root)
    bundles = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        bundle = load_bundle(sub)
        bundles[bundle.contract] = bundle
    return bundles


def _words(name: str) -> list[str]:
    return [w.lower() for w in _WORDS.findall(name)]


def _name_matches(name: str, keyword: str) -> bool:
    words, key = _words(name), _words(keyword)
    if not key:
        return False
    return any(words[i : i + len(key)] == key for i in range(len(words) - len(key) + 1))


def _mask(src: str) -> str:
    """Blank out comments and string literals, keeping offsets, so scans only see code."""
    out = list(src)
    i, n = 0, len(src)
    while i < n:
        if src.startswith("//", i):
            end = src.find("\n", i)
            end = n if end < 0 else end
        elif src.startswith("/*", i):
            end = src.find("*/", i + 2)
            end = n if end < 0 else end + 2
        elif src[i] in "\"'":
            end = i + 1
            while end < n and src[end] != src[i]:
                end += 2 if src[end] == "\\" else 1
            end = min(end + 1, n)
        else:
            i += 1
            continue
        for k in range(i, end):
            if out[k] != "\n":
                out[k] = " "
        i = end
    return "".join(out)


def _skip_to_matching(code: str, open_pos: int, open_ch: str, close_ch: str) -> int:
    """Index just past the bracket matching ``code[open_pos]`` in masked source."""
    depth = 0
    for i in range(open_pos, len(code)):
        ch = code[i]
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return i + 1
    return len(code)


_ELEMENTARY = {"uint": "uint256", "int": "int256", "byte": "bytes1", "ufixed": "ufixed128x18", "fixed": "fixed128x18"}


def _canonical_type(param: str) -> str:
    tokens = [t for t in param.split() if t not in ("memory", "calldata", "storage", "payable", "indexed")]
    if not tokens:
        return ""
    base = tokens[0]
    m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)(.*)", base)
    head, suffix = m.group(1), m.group(2)
    return _ELEMENTARY.get(head, head) + suffix


def function_selector(name: str, params: str) -> str:
    types = ",".join(t for t in (_canonical_type(p) for p in params.split(",")) if t)
    digest = keccak.new(digest_bits=256, data=f"{name}({types})".encode()).hexdigest()
    return "0x" + digest[:8]


def iter_functions(source: str):
    """Yield (name, params, full text, masked body) for every function that has a body."""
    code = _mask(source)
    for m in _FUNCTION.finditer(code):
        params_open = m.end() - 1
        params_close = _skip_to_matching(code, params_open, "(", ")")
        params = source[params_open + 1 : params_close - 1]
        brace = code.find("{", params_close)
        semi = code.find(";", params_close)
        if brace < 0 or (0 <= semi < brace):
            continue  # declaration without a body
        end = _skip_to_matching(code, brace, "{", "}")
        yield m.group(1), params, source[m.start() : end], code[brace:end]


def extract_price_functions(bundle: SourceBundle, signatures=DEFAULT_SIGNATURES) -> str:
    """Functions matching the signature set, plus the bundle functions they call, in source order.

    Following calls keeps helpers such as an aggregation routine next to the
    entry point that uses them; without them the snippet hides the model.
    """
    if not bundle.verified:
        raise NoSource(f"no verified source for {bundle.contract}")
    selectors = {s.lower() for s in signatures if re.fullmatch(r"0x[0-9a-fA-F]{8}", s)}
    keywords = [s for s in signatures if s.lower() not in selectors]
    functions = [fn for name in sorted(bundle.files) for fn in iter_functions(bundle.files[name])]
    by_name: dict[str, list[int]] = {}
    for i, (fn_name, _, _, _) in enumerate(functions):
        by_name.setdefault(fn_name, []).append(i)

    picked: set[int] = set()
    todo = []
    for i, (fn_name, params, _, _) in enumerate(functions):
        hit = any(_name_matches(fn_name, k) for k in keywords)
        if not hit and selectors:
            hit = function_selector(fn_name, params) in selectors
        if hit:
            todo.append(i)
    while todo:
        i = todo.pop()
        if i in picked:
            continue
        picked.add(i)
        body = functions[i][3]
        for called in set(re.findall(r"(?<![.\w$])([A-Za-z_$][\w$]*)\s*\(", body)):
            todo.extend(by_name.get(called, ()))
    return "\n\n".join(functions[i][2].strip() for i in sorted(picked))
