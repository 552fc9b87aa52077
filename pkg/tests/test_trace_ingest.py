import copy
import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, NULL, fixture, tr
from pricescope.chain.address import ZERO_ADDRESS, Address
from pricescope.chain.invocations import (
    compute_balance_deltas,
    net_deltas,
    slice_user_invocations,
)
from pricescope.chain.rpc import fetch_trace, trace_from_call_tracer
from pricescope.chain.trace import (
    load_trace,
    save_trace,
    trace_from_dict,
    trace_to_dict,
)
from pricescope.chain.transfers import (
    TRANSFER_TOPIC,
    WETH_DEPOSIT_TOPIC,
    TransferKind,
    decode_transfers,
)
from pricescope.errors import (
    MalformedLog,
    NetworkError,
    ParseError,
    TracerUnsupported,
    TxNotFound,
    VersionError,
)
from pricescope.graph import identify_user_controlled

TX = "0x" + "ab" * 32
WETH = Address("0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2")


def word(x) -> str:
    if isinstance(x, str):
        return "0x" + "00" * 12 + x[2:]
    return "0x" + format(x, "064x")


def transfer_log(token, sender, receiver, value, idx=None):
    out = {"address": token, "topics": [TRANSFER_TOPIC, word(sender), word(receiver)], "data": word(value)}
    if idx is not None:
        out["logIndex"] = idx
    return out


def doc(children=(), logs=(), **extra):
    d = {
        "version": 1,
        "txHash": TX,
        "initiator": A(1),
        "calls": [{"caller": A(1), "callee": A(2), "selector": "0x12345678", "logs": list(logs), "children": list(children)}],
    }
    d.update(extra)
    return d


def frame(caller, callee, selector="0x022c0d9f", logs=(), children=(), depth=1):
    return {"caller": caller, "callee": callee, "selector": selector, "depth": depth, "logs": list(logs), "children": list(children)}


# --- parsing -------------------------------------------------------------------


def test_round_trip_preserves_fixture(tmp_path):
    t = fixture("uwulend.json")
    save_trace(t, tmp_path / "x.json")
    again = load_trace(tmp_path / "x.json")
    assert again == t
    assert trace_to_dict(again) == trace_to_dict(t)


def test_missing_version_and_wrong_version():
    d = doc()
    del d["version"]
    with pytest.raises(ParseError):
        trace_from_dict(d)
    with pytest.raises(VersionError):
        trace_from_dict(doc(version=2))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(initiator="0x12"),
        lambda d: d.update(txHash="0x1234"),
        lambda d: d.update(calls={}),
        lambda d: d["calls"][0].update(selector="0x1234"),
        lambda d: d["calls"][0].update(depth=3),
        lambda d: d["calls"][0].update(logs=[{"address": A(3), "topics": ["zz"]}]),
        lambda d: d.update(blockNumber="12"),
        lambda d: d.update(calls=[d["calls"][0], d["calls"][0]]),
    ],
)
def test_malformed_fixtures_raise_parse_error(mutate):
    d = doc()
    mutate(d)
    with pytest.raises(ParseError):
        trace_from_dict(d)


def test_bad_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_trace(p)


# --- transfers -----------------------------------------------------------------


def test_decode_transfers_in_log_index_order_with_call_paths():
    tok = A(10)
    inner = frame(A(2), A(3), logs=[transfer_log(tok, A(3), A(1), 5, idx=0)], depth=1)
    d = doc(children=[inner], logs=[transfer_log(tok, A(1), A(3), 7, idx=1)])
    ts = decode_transfers(trace_from_dict(d))
    assert [t.value for t in ts] == [5, 7]
    assert [t.seq for t in ts] == [0, 1]
    assert ts[0].call_path == (A(2), A(3))
    assert ts[1].call_path == (A(2),)


def test_mint_burn_classification_and_weth_events():
    tok = A(10)
    logs = [
        transfer_log(tok, ZERO_ADDRESS, A(1), 3),
        transfer_log(tok, A(1), "0x000000000000000000000000000000000000dead", 1),
        {"address": WETH, "topics": [WETH_DEPOSIT_TOPIC, word(A(1))], "data": word(9)},
        # unrelated event is ignored
        {"address": tok, "topics": ["0x" + "11" * 32], "data": "0x"},
    ]
    ts = decode_transfers(trace_from_dict(doc(logs=logs)))
    assert [t.kind for t in ts] == [TransferKind.MINTING, TransferKind.BURNING, TransferKind.MINTING]
    assert ts[2].token == WETH and ts[2].receiver == A(1) and ts[2].value == 9


def test_malformed_transfer_logs_are_skipped_with_warning():
    tok = A(10)
    logs = [
        {"address": tok, "topics": [TRANSFER_TOPIC, word(A(1))], "data": word(1)},  # ERC-721 style / short
        {"address": tok, "topics": [TRANSFER_TOPIC, word(A(1)), word(A(2))], "data": "0x01"},
        transfer_log(tok, ZERO_ADDRESS, ZERO_ADDRESS, 1),
        transfer_log(tok, A(1), A(2), 4),
    ]
    warnings = []
    ts = decode_transfers(trace_from_dict(doc(logs=logs)), warnings=warnings)
    assert [t.value for t in ts] == [4]
    assert len(warnings) == 3 and all("MalformedLog" in w for w in warnings)


def test_transfer_action_rejects_inconsistent_kind():
    with pytest.raises(ValueError):
        from pricescope.chain.transfers import TransferAction

        TransferAction(A(1), A(2), A(3), 1, TransferKind.MINTING)
    with pytest.raises(MalformedLog):
        tr(NULL, NULL, A(3))


# --- invocations ---------------------------------------------------------------


def test_bare_token_calls_merge_into_next_protocol_call():
    tok, pair = A(10), A(20)
    children = [
        frame(A(2), tok, "0xa9059cbb", logs=[transfer_log(tok, A(2), pair, 5, 0)]),
        frame(A(2), pair, "0x022c0d9f", logs=[transfer_log(A(11), pair, A(2), 4, 1)]),
        frame(A(2), A(30), "0xdeadbeef", logs=[transfer_log(A(11), A(2), A(30), 4, 2)]),
    ]
    t = trace_from_dict(doc(children=children))
    uc = identify_user_controlled(t)
    assert A(2) in uc and uc.entry_heuristic
    invs = slice_user_invocations(t, uc.accounts)
    assert [len(i.transfers) for i in invs] == [2, 1]
    assert [f.callee for f in invs[0].roots] == [tok, pair]


def test_callback_protocol_calls_become_nested_invocations():
    lender, pool, tok = A(40), A(41), A(10)
    callback = frame(
        lender, A(2), "0x10d1e85c",
        children=[
            frame(A(2), pool, "0xe8eda9df", logs=[transfer_log(tok, A(2), pool, 3, 1)], depth=3),
            frame(A(2), tok, "0xa9059cbb", logs=[transfer_log(tok, A(2), lender, 10, 2)], depth=3),
        ],
        depth=2,
    )
    flash = frame(A(2), lender, "0x5cffe9de", logs=[transfer_log(tok, lender, A(2), 10, 0)], children=[callback])
    t = trace_from_dict(doc(children=[flash]))
    invs = slice_user_invocations(t, identify_user_controlled(t).accounts)
    assert [[x.value for x in i.transfers] for i in invs] == [[10, 10], [3]]


def test_balance_deltas_include_supply_and_sum_to_zero():
    tok = A(10)
    ts = [tr(NULL, A(1), tok, 10), tr(A(1), A(2), tok, 4), tr(A(2), NULL, tok, 1)]
    deltas = compute_balance_deltas(ts)
    by = {d.account: d for d in deltas}
    assert by[A(1)].delta == 6 and by[A(2)].delta == 3
    assert by[ZERO_ADDRESS].total_supply_delta == 9
    assert sum(d.delta for d in deltas) == 0


def test_delta_overflow_is_reported():
    tok = A(10)
    big = 2**256 - 1
    with pytest.raises(OverflowError):
        net_deltas([tr(A(1), A(2), tok, big), tr(A(1), A(2), tok, big)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2), st.integers(1, 10**30)), max_size=30))
def test_per_token_deltas_balance(moves):
    accounts = [NULL, A(1), A(2), A(3), A(4)]
    ts = []
    for s, r, k, v in moves:
        if s == r or (s == 0 and r == 0):
            continue
        ts.append(tr(accounts[s], accounts[r], A(10 + k), v))
    totals = {}
    for d in compute_balance_deltas(ts):
        totals[d.token] = totals.get(d.token, 0) + d.delta
    assert all(v == 0 for v in totals.values())


# --- rpc -------------------------------------------------------------------------


def _rpc_handler(responses):
    def handle(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        result = responses[body["method"]]
        if isinstance(result, dict) and "__error__" in result:
            return httpx.Response(200, json={"jsonrpc": "2.0", "id": body["id"], "error": result["__error__"]})
        return httpx.Response(200, json={"jsonrpc": "2.0", "id": body["id"], "result": result})

    return httpx.MockTransport(handle)


CALL_TREE = {
    "from": str(A(1)),
    "to": str(A(2)),
    "input": "0x12345678",
    "type": "CALL",
    "logs": [
        {"address": str(A(10)), "topics": [TRANSFER_TOPIC, word(A(2)), word(A(1))], "data": word(2), "position": 1}
    ],
    "calls": [
        {
            "from": str(A(2)),
            "to": str(A(3)),
            "input": "0xabcdef01",
            "type": "CALL",
            "logs": [{"address": str(A(10)), "topics": [TRANSFER_TOPIC, word(A(3)), word(A(2))], "data": word(2), "position": 0}],
        },
        {
            "from": str(A(2)),
            "to": str(A(4)),
            "input": "0x",
            "type": "CALL",
            "error": "execution reverted",
            "logs": [{"address": str(A(10)), "topics": [TRANSFER_TOPIC, word(A(4)), word(A(2))], "data": word(9), "position": 0}],
        },
    ],
}


def test_fetch_trace_normalizes_call_tracer_output():
    responses = {
        "eth_getTransactionByHash": {"blockNumber": "0x10"},
        "debug_traceTransaction": CALL_TREE,
        "eth_chainId": "0x38",
        "eth_getTransactionReceipt": {"logs": [{}, {}]},
    }
    t = fetch_trace("http://node", TX, transport=_rpc_handler(responses))
    assert t.block_number == 16 and t.chain_id == 56
    ts = decode_transfers(t)
    # child log (position 0) precedes the parent's log at position 1; reverted frame's log dropped
    assert [(x.sender, x.value) for x in ts] == [(A(3), 2), (A(2), 2)]
    assert trace_from_call_tracer(TX, CALL_TREE, block_number=1, chain_id=1).entry.selector == "0x12345678"


def test_fetch_trace_errors():
    base = {"eth_getTransactionByHash": None}
    with pytest.raises(TxNotFound):
        fetch_trace("http://node", TX, transport=_rpc_handler(base))
    unsupported = {
        "eth_getTransactionByHash": {"blockNumber": "0x1"},
        "debug_traceTransaction": {"__error__": {"code": -32601, "message": "the method debug_traceTransaction does not exist"}},
    }
    with pytest.raises(TracerUnsupported):
        fetch_trace("http://node", TX, transport=_rpc_handler(unsupported))

    def down(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(NetworkError):
        fetch_trace("http://node", TX, transport=httpx.MockTransport(down))
