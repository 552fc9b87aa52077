import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, NULL, UCA, fixture, graph_of, tr
from oracles import enumerate_uc_cycles
from pricescope.chain.invocations import slice_user_invocations
from pricescope.errors import SearchBudgetExceeded
from pricescope.graph import UC, build_graph, identify_user_controlled, to_dot
from pricescope.operations import (
    DeFiOperation,
    OpKind,
    recover_all,
    recover_borrows,
    recover_claims,
    recover_deposits,
    recover_stakes,
    recover_swaps,
    recover_withdraws,
)

X, Y, Z, P = A(10), A(11), A(12), A(13)  # tokens
POOL, POOL2, BANK = A(20), A(21), A(30)


def test_fig4_fixture_yields_single_swap():
    t = fixture("fig4.json")
    uc = identify_user_controlled(t)
    (inv,) = slice_user_invocations(t, uc.accounts)
    g = build_graph(inv, uc)
    swaps, labels = recover_swaps(g)
    assert len(swaps) == 1
    assert swaps[0].edge_refs == (1, 4, 5, 7)
    assert len(labels) == 3


def test_swap_requires_increasing_times_and_distinct_tokens():
    g = graph_of([tr(POOL, UCA, Y, 5), tr(UCA, POOL, X, 5)])
    assert recover_swaps(g)[0] == []
    g = graph_of([tr(UCA, POOL, X, 5), tr(POOL, UCA, X, 5)])
    assert recover_swaps(g)[0] == []
    g = graph_of([tr(UCA, POOL, X, 5), tr(POOL, UCA, Y, 4)])
    (op,), (label,) = recover_swaps(g)
    assert (op.token_in, op.token_out, op.contracts) == (X, Y, (POOL,))
    assert label.tokens == frozenset({X, Y})


def test_mint_edges_never_form_swap_cycles():
    g = graph_of([tr(UCA, POOL, X, 5), tr(NULL, UCA, Y, 4)])
    assert recover_swaps(g)[0] == []


def test_deposit_withdraw_borrow():
    g = graph_of([tr(UCA, BANK, X, 10), tr(NULL, UCA, P, 10), tr(UCA, NULL, P, 10), tr(BANK, UCA, X, 11)])
    (dep,) = recover_deposits(g)
    assert dep.edge_refs == (1, 2) and dep.token_proof == P and dep.token_in == X
    (wd,) = recover_withdraws(g)
    assert wd.edge_refs == (3, 4) and wd.token_out == X
    g = graph_of([tr(NULL, UCA, Z, 3), tr(BANK, UCA, Y, 3)])
    (b,) = recover_borrows(g)
    assert b.edge_refs == (1, 2) and b.token_debt == Z and b.token_out == Y


def test_borrow_prefers_mint_emitted_under_the_lender():
    lender, flash = A(31), A(32)
    ts = [
        tr(flash, UCA, Y, 100, call_path=(UCA, flash, Y)),  # flash loan inflow
        tr(NULL, UCA, Z, 5, call_path=(UCA, lender, Z)),  # debt mint
        tr(lender, UCA, X, 5, call_path=(UCA, lender, X)),
    ]
    (b,) = recover_borrows(graph_of(ts))
    assert b.contracts == (lender,) and b.edge_refs == (2, 3)


def test_stake_claim_active_check():
    ts = [tr(UCA, BANK, X, 10, call_path=(UCA, BANK, X)), tr(UCA, A(40), X, 1, call_path=(UCA, X))]
    ops = recover_stakes(graph_of(ts))
    assert [o.contracts for o in ops] == [(BANK,)]
    assert len(recover_stakes(graph_of(ts), require_active=False)) == 2
    ts = [tr(BANK, UCA, Y, 3, call_path=(UCA, BANK, Y))]
    assert len(recover_claims(graph_of(ts))) == 1
    # a prior burn by UC makes the inflow a withdraw candidate, not a claim
    ts = [tr(UCA, NULL, P, 1), tr(BANK, UCA, Y, 3, call_path=(UCA, BANK, Y))]
    assert recover_claims(graph_of(ts)) == []


def test_precedence_swap_edges_hidden_from_lower_classes():
    ts = [
        tr(UCA, POOL, X, 5, call_path=(UCA, POOL, X)),
        tr(POOL, UCA, Y, 4, call_path=(UCA, POOL, Y)),
        tr(UCA, BANK, Y, 4, call_path=(UCA, BANK, Y)),
        tr(NULL, UCA, P, 4, call_path=(UCA, BANK, P)),
    ]
    ops, _ = recover_all(graph_of(ts))
    assert [o.kind for o in ops] == [OpKind.SWAP, OpKind.DEPOSIT]


def test_operation_validation():
    with pytest.raises(ValueError):
        DeFiOperation(OpKind.SWAP, (2, 1), (POOL,), X, Y)
    with pytest.raises(ValueError):
        DeFiOperation(OpKind.SWAP, (1, 2), (POOL,), X, X)
    op = DeFiOperation(OpKind.STAKE, (3,), (POOL,), token_in=X)
    assert (op.start, op.end) == (3, 3)
    assert op.to_dict()["tokenIn"] == X


def test_search_budget():
    # many parallel UC -> hub -> UC transfers blow up combinatorially
    ts = []
    for i in range(30):
        ts.append(tr(UCA, POOL, X, 1))
        ts.append(tr(POOL, UCA, Y, 1))
    with pytest.raises(SearchBudgetExceeded) as exc:
        recover_swaps(graph_of(ts), budget=50)
    assert exc.value.cap == 50


def test_dot_rendering():
    g = graph_of([tr(UCA, POOL, X, 5), tr(POOL, UCA, Y, 4)])
    dot = to_dot(g, labels={str(POOL): "Pair"})
    assert dot.startswith("digraph tg_0 {")
    assert '"Pair"' in dot and "T1:" in dot and "T2:" in dot


def test_serialization_is_deterministic():
    ts = [tr(UCA, POOL, X, 5), tr(POOL, UCA, Y, 4)]
    assert graph_of(ts).serialize() == graph_of(list(ts)).serialize()


NODES = [UCA, POOL, POOL2, A(22), NULL]
TOKENS = [X, Y, Z]


@st.composite
def small_graphs(draw, max_edges=12):
    n = draw(st.integers(0, max_edges))
    ts = []
    for _ in range(n):
        s = draw(st.sampled_from(NODES))
        r = draw(st.sampled_from([v for v in NODES if v != s or v != NULL]))
        if s == NULL and r == NULL:
            r = UCA
        ts.append(tr(s, r, draw(st.sampled_from(TOKENS)), 1))
    return graph_of(ts)


@settings(max_examples=150, deadline=None)
@given(small_graphs())
def test_swap_search_matches_exhaustive_enumeration(g):
    swaps, _ = recover_swaps(g)
    assert {op.edge_refs for op in swaps} == enumerate_uc_cycles(g)


@settings(max_examples=100, deadline=None)
@given(small_graphs())
def test_recovered_operations_never_share_edges_across_classes(g):
    ops, _ = recover_all(g, require_active=False)
    nonswap = [t for op in ops if op.kind is not OpKind.SWAP for t in op.edge_refs]
    assert len(nonswap) == len(set(nonswap))
    swap_edges = {t for op in ops if op.kind is OpKind.SWAP for t in op.edge_refs}
    assert swap_edges.isdisjoint(nonswap)
