"""Acceptance criteria 1-10, one PASS/FAIL line each.

Tolerances are pinned here; every check compares against an oracle that does
not share code with the routine under test.
"""
import copy
import json
import random
import time
import warnings
from fractions import Fraction
from pathlib import Path

import pytest

from conftest import ACCEPTANCE, FIXTURES, GOLDEN, A, NULL, UCA, fixture, graph_of, tr
from oracles import enumerate_uc_cycles
from pricescope import DetectConfig, detect
from pricescope.amm import (
    CpmmPool,
    StableswapPool,
    bisect_D,
    cpmm_swap_exact_in,
    invariant_residual,
    newton_D,
    stableswap_solve_D,
)
from pricescope.chain.address import Address, is_null
from pricescope.chain.invocations import slice_user_invocations
from pricescope.chain.tokens import TokenRegistry
from pricescope.cli import main
from pricescope.errors import TimeoutWarning
from pricescope.graph import UC, build_graph, identify_user_controlled
from pricescope.inference import InferenceBackendConfig, analytic_infer, load_bundles, resolve_verdicts
from pricescope.inference.engine import build_windows, plan_queries, positioned
from pricescope.inference.statements import Backend, PriceDirection, ScoredStatement, generate_statements
from pricescope.operations import OpKind, recover_all, recover_swaps

CPMM_SWAPS, CPMM_MAX_SECONDS = 1000, 1.0
STABLE_POOLS, D_ULPS, RESIDUAL_MAX = 500, 1, Fraction(1, 10**10)
RANDOM_GRAPHS, MAX_EDGES = 200, 12
SYNTH_COUNT = 1000
BATCH_SIZE, BATCH_MAX_AVG_SECONDS = 1000, 2.5
PATHOLOGICAL_MAX_SECONDS = 300

ATTACKS = {f"pattern_{p.lower()}": p for p in ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")}
BENIGN = sorted(p.stem for p in (FIXTURES / "benign").glob("*.json"))


def record(n: int, ok: bool, detail: str):
    ACCEPTANCE[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[n])
    assert ok, detail


# 1 ----------------------------------------------------------------------------------------


def test_criterion_01_cpmm_analytic_matches_brute_force():
    rng = random.Random(1)
    x_tok, y_tok = A(10), A(11)
    cases = []
    for _ in range(CPMM_SWAPS):
        pool = CpmmPool(rng.randint(10**18, 10**27), rng.randint(10**18, 10**27), x_tok, y_tok, rng.choice([0, 5, 30, 100]))
        token = rng.choice([x_tok, y_tok])
        amount = rng.randint(10**12, pool.reserve_of(token) // 2)
        cases.append((pool, token, cpmm_swap_exact_in(pool, token, amount)[1]))
    began = time.perf_counter()
    results = [analytic_infer(before, after) for before, _, after in cases]
    elapsed = time.perf_counter() - began
    agree = 0
    for (before, token, after), verdicts in zip(cases, results):
        # brute force: price of x is y/x, compared by cross-multiplying integers
        x_up = after.reserve_y * before.reserve_x > before.reserve_y * after.reserve_x
        want = {
            x_tok: PriceDirection.INCREASE if x_up else PriceDirection.DECREASE,
            y_tok: PriceDirection.DECREASE if x_up else PriceDirection.INCREASE,
        }
        agree += {v.token: v.direction for v in verdicts} == want
    record(1, agree == CPMM_SWAPS and elapsed < CPMM_MAX_SECONDS,
           f"{agree}/{CPMM_SWAPS} swaps agree, {elapsed:.3f}s (< {CPMM_MAX_SECONDS}s)")


# 2 ----------------------------------------------------------------------------------------


def test_criterion_02_stableswap_D():
    rng = random.Random(2)
    balanced_ok = all(
        stableswap_solve_D(StableswapPool((x,) * n, amp)) == n * x
        for n in (2, 3, 4)
        for x, amp in [(rng.randint(1, 10**27), rng.randint(1, 5000)) for _ in range(50)]
    )
    worst_gap, worst_residual = 0, Fraction(0)
    for _ in range(STABLE_POOLS):
        n = rng.choice([2, 3, 4])
        pool = StableswapPool(tuple(rng.randint(10**18, 10**27) for _ in range(n)), rng.randint(1, 5000))
        worst_gap = max(worst_gap, abs(newton_D(pool) - bisect_D(pool)))
        worst_residual = max(worst_residual, invariant_residual(pool.reserves, pool.amp, stableswap_solve_D(pool)))
    ok = balanced_ok and worst_gap <= D_ULPS and worst_residual <= RESIDUAL_MAX
    record(2, ok, f"balanced D exact={balanced_ok}, max |newton-bisect|={worst_gap} unit, "
                  f"max residual={float(worst_residual):.2e} (<= 1e-10) over {STABLE_POOLS} pools")


# 3 ----------------------------------------------------------------------------------------


def test_criterion_03_fig4_single_swap():
    t = fixture("fig4.json")
    uc = identify_user_controlled(t)
    (inv,) = slice_user_invocations(t, uc.accounts)
    g = build_graph(inv, uc)
    ops, labels = recover_all(g)
    names = {Address(k): v for k, v in t.annotations["labels"].items()}
    swaps = [op for op in ops if op.kind is OpKind.SWAP]
    path = [UC] + [names[c] for c in swaps[0].contracts] + [UC] if swaps else []
    pools = {names[p.address] for p in labels}
    ok = len(ops) == 1 and len(swaps) == 1 and path == ["UC", "CA1", "CA2", "CA3", "UC"] and pools == {"CA1", "CA2", "CA3"}
    record(3, ok, f"{len(ops)} op(s), path {'->'.join(path)}, pools {sorted(pools)}")


# 4 ----------------------------------------------------------------------------------------


def test_criterion_04_swap_search_is_exhaustive():
    rng = random.Random(4)
    pools = [A(20), A(21), A(22)]
    tokens = [A(10), A(11), A(12)]
    mismatches, cycles = 0, 0
    for _ in range(RANDOM_GRAPHS):
        ts = []
        for _ in range(rng.randint(1, MAX_EDGES)):
            roll = rng.random()
            if roll < 0.35:
                s, r = UCA, rng.choice(pools)
            elif roll < 0.7:
                s, r = rng.choice(pools), UCA
            elif roll < 0.9:
                s, r = rng.sample(pools, 2)
            elif roll < 0.95:
                s, r = rng.choice([(NULL, UCA), (UCA, NULL), (NULL, rng.choice(pools))])
            else:
                s, r = UCA, UCA
            ts.append(tr(s, r, rng.choice(tokens), rng.randint(1, 100)))
        g = graph_of(ts)
        want = enumerate_uc_cycles(g)
        got = {op.edge_refs for op in recover_swaps(g)[0]}
        cycles += len(want)
        mismatches += got != want
    record(4, mismatches == 0, f"{RANDOM_GRAPHS - mismatches}/{RANDOM_GRAPHS} graphs match exhaustive enumeration ({cycles} cycles)")


# 5 ----------------------------------------------------------------------------------------


def test_criterion_05_attack_and_benign_fixtures():
    cfg = DetectConfig()
    wrong = []
    for name, pattern in ATTACKS.items():
        got = [f.pattern.value for f in detect(fixture(f"patterns/{name}.json"), cfg).findings]
        if got != [pattern]:
            wrong.append(f"{name}: {got}")
    for name in BENIGN:
        got = [f.pattern.value for f in detect(fixture(f"benign/{name}.json"), cfg).findings]
        if got:
            wrong.append(f"{name}: {got}")
    ok = not wrong and len(ATTACKS) == 8 and len(BENIGN) == 8
    record(5, ok, f"{len(ATTACKS)} attack + {len(BENIGN)} benign fixtures" + (f"; wrong: {wrong}" if wrong else " as intended"))


# 6 ----------------------------------------------------------------------------------------


def _balance_lines(record_):
    user = record_["messages"][1]["content"]
    return [line for line in user.splitlines() if line.startswith("The balance of")]


def test_criterion_06_synth_dataset(tmp_path, capsys):
    outs = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    codes = [main(["synth", "--count", str(SYNTH_COUNT), "--seed", "11", "--out", str(p)]) for p in outs]
    capsys.readouterr()
    records = [json.loads(line) for line in outs[0].read_text().splitlines()]
    inflate = deflate = opposite = 0
    for rec in records:
        a, b = _balance_lines(rec)
        opposite += ("increases" in a) != ("increases" in b)
        # token_0 is the pool's token_y; its balance falling means its price inflates
        if "decreases" in a:
            inflate += 1
        else:
            deflate += 1
    identical = outs[0].read_bytes() == outs[1].read_bytes()
    ok = codes == [0, 0] and len(records) == SYNTH_COUNT and (inflate, deflate) == (500, 500) and opposite == SYNTH_COUNT and identical
    record(6, ok, f"{inflate} Inflate + {deflate} Deflate, {opposite} with opposite signs, byte-identical={identical}")


# 7 ----------------------------------------------------------------------------------------


def uwulend_type1_query():
    """The Type-I query for the lending pool in the window holding the five USDe sells."""
    t = fixture("uwulend.json")
    uc = identify_user_controlled(t)
    invs = slice_user_invocations(t, uc.accounts)
    ops, pools = [], []
    for inv in invs:
        o, p = recover_all(build_graph(inv, uc))
        ops += o
        pools += p
    timeline = positioned(invs)
    windows = build_windows(ops, timeline[-1][0])
    ann = t.annotations
    labels = {Address(k): v for k, v in ann["labels"].items()}
    cfg = InferenceBackendConfig(kind="llm-type1", endpoint="http://unused.invalid")
    queries = plan_queries(
        windows, timeline, pools, load_bundles(FIXTURES / "sources"), cfg,
        uc=uc.accounts, tokens=TokenRegistry.from_annotations(ann["tokens"]), labels=labels,
    )
    swap_window = next(w for w in windows if sum(op.kind is OpKind.SWAP for op in w.ops) == 5)
    (query,) = [q for q in queries if q.window.index == swap_window.index]
    return query, timeline, uc, labels, ann


def test_criterion_07_uwulend_type1_prompt():
    query, timeline, uc, labels, ann = uwulend_type1_query()
    prompt = query.prompt
    golden = (GOLDEN / "uwulend_type1_prompt.txt").read_text()
    # independent count of nonzero non-user balance deltas inside the window, plus supply moves
    net: dict = {}
    supply: dict = {}
    for pos, t in timeline:
        if not query.window.contains(pos):
            continue
        for acct, sign in ((t.sender, -1), (t.receiver, 1)):
            if is_null(acct):
                supply[t.token] = supply.get(t.token, 0) - sign * t.value
            elif acct not in uc:
                net[(acct, t.token)] = net.get((acct, t.token), 0) + sign * t.value
    expected_lines = sum(1 for d in net.values() if d) + sum(1 for d in supply.values() if d)
    body = prompt.split("<change_description>\n", 1)[1].split("\n</change_description>", 1)[0]
    change_lines = body.splitlines()
    usde_lines = [l for l in change_lines if l.startswith("The balance of USDe in Pool_")]
    both = all(
        f"The price of sUSDe in UwuLendingPool {verb} after change." in prompt for verb in ("increases", "decreases")
    )
    ok = prompt == golden and both and len(change_lines) == expected_lines and len(usde_lines) == 5 and "function median(" in prompt
    record(7, ok, f"golden match={prompt == golden}, opposing sUSDe statements={both}, "
                  f"{len(change_lines)} change lines for {expected_lines} nonzero deltas ({len(usde_lines)} USDe pool lines)")


# 8 ----------------------------------------------------------------------------------------


def test_criterion_08_resolve_verdicts():
    inc, dec = generate_statements([A(10)], [A(20)])
    got = []
    for up, down in ((9, 2), (5, 5), (3, 4)):
        vs = resolve_verdicts([ScoredStatement(inc, up), ScoredStatement(dec, down)], Backend.LLM_TYPE1)
        got.append(tuple((v.direction.value, v.confidence) for v in vs))
    ok = got == [(("Increase", 9),), (), (("Decrease", 4),)]
    record(8, ok, f"(9,2)->{got[0]}, (5,5)->{got[1] or 'discarded'}, (3,4)->{got[2]}")


# 9 ----------------------------------------------------------------------------------------


def test_criterion_09_benign_batch_throughput(tmp_path, capsys):
    folder = tmp_path / "batch"
    folder.mkdir()
    sources = [json.loads((FIXTURES / "benign" / f"{n}.json").read_text()) for n in BENIGN]
    for i in range(BATCH_SIZE):
        doc = copy.deepcopy(sources[i % len(sources)])
        doc["txHash"] = "0x" + format(i, "064x")
        (folder / f"tx{i:04d}.json").write_text(json.dumps(doc))
    out = tmp_path / "out.jsonl"
    began = time.perf_counter()
    code = main(["scan", "--batch", str(folder), "--jobs", "1", "--out", str(out)])
    elapsed = time.perf_counter() - began
    capsys.readouterr()
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    avg = elapsed / BATCH_SIZE
    clean = code == 0 and len(lines) == BATCH_SIZE and not any(l.get("findings") or l.get("error") for l in lines)
    record(9, clean and avg < BATCH_MAX_AVG_SECONDS,
           f"{len(lines)} benign transactions, {avg * 1000:.1f} ms average (< {BATCH_MAX_AVG_SECONDS}s), clean={clean}")


# 10 ---------------------------------------------------------------------------------------


def test_criterion_10_pathological_terminates(capsys, tmp_path):
    began = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = detect(fixture("pathological.json"), DetectConfig())
    elapsed = time.perf_counter() - began
    warned = any(issubclass(w.category, TimeoutWarning) for w in caught)
    reasons = sorted({w.get("reason") for w in report.warnings if w["kind"] == "TimeoutWarning"})
    # the wall-clock route: a short --timeout stops the search before the path cap does
    out = tmp_path / "short.json"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TimeoutWarning)
        code = main(["scan", "--fixture", str(FIXTURES / "pathological.json"), "--timeout", "0.05", "--out", str(out)])
    capsys.readouterr()
    short = json.loads(out.read_text())
    short_ok = code == 0 and short["partial"] and any(w.get("reason") == "deadline" for w in short["warnings"])
    ok = report.partial and warned and elapsed < PATHOLOGICAL_MAX_SECONDS and bool(report.operations) and short_ok
    record(10, ok, f"partial={report.partial}, TimeoutWarning={warned} ({', '.join(reasons)}), "
                   f"{len(report.operations)} ops kept, {elapsed:.2f}s (< {PATHOLOGICAL_MAX_SECONDS}s); "
                   f"--timeout 0.05 gives partial deadline report={short_ok}")
