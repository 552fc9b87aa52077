"""End-to-end detection for one transaction."""
from __future__ import annotations

import logging
import time
import warnings as pywarnings
from dataclasses import dataclass, field

import httpx

from .chain.address import Address
from .chain.invocations import net_deltas, slice_user_invocations
from .chain.tokens import TokenRegistry
from .chain.trace import TransactionTrace
from .chain.transfers import decode_transfers
from .errors import PriceScopeError, ScanTimeout, SearchBudgetExceeded, TimeoutWarning
from .graph import TransferGraph, UserControlledSet, build_graph, identify_user_controlled, known_routers
from .inference.analytic import load_models
from .inference.engine import infer_price_changes
from .inference.llm import InferenceBackendConfig
from .inference.sources import DEFAULT_SIGNATURES, SourceBundle
from .inference.statements import PriceChangeVerdict
from .operations import DEFAULT_SEARCH_BUDGET, DeFiOperation, PoolLabel, recover_all
from .patterns import DEFAULT_MIN_CONFIDENCE, AttackFinding, match_patterns

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_SECS = 300


@dataclass
class DetectConfig:
    backend: InferenceBackendConfig = field(default_factory=InferenceBackendConfig)
    timeout_secs: float = DEFAULT_TIMEOUT_SECS
    search_budget: int = DEFAULT_SEARCH_BUDGET
    min_confidence: int = DEFAULT_MIN_CONFIDENCE
    models: list[dict] = field(default_factory=list)  # on top of the trace's own annotations
    bundles: dict[Address, SourceBundle] = field(default_factory=dict)
    signatures: frozenset[str] = DEFAULT_SIGNATURES
    require_active: bool = True
    transport: httpx.BaseTransport | None = None

    def __post_init__(self):
        if self.timeout_secs <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class DetectionReport:
    tx_hash: str
    findings: list[AttackFinding] = field(default_factory=list)
    operations: list[DeFiOperation] = field(default_factory=list)
    verdicts: list[PriceChangeVerdict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[dict] = field(default_factory=list)
    user_controlled: UserControlledSet | None = None
    graphs: list[TransferGraph] = field(default_factory=list)
    pools: list[PoolLabel] = field(default_factory=list)
    uc_net: dict[Address, int] = field(default_factory=dict)
    partial: bool = False

    def to_dict(self) -> dict:
        out = {
            "txHash": self.tx_hash,
            "findings": [f.to_dict() for f in self.findings],
            "operations": [op.to_dict() for op in self.operations],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "timings": {k: round(v, 3) for k, v in self.timings.items()},
            "warnings": list(self.warnings),
            "partial": self.partial,
        }
        if self.user_controlled is not None:
            out["userControlled"] = {
                "accounts": list(self.user_controlled),
                "entryHeuristic": self.user_controlled.entry_heuristic,
            }
        out["pools"] = [{"address": p.address, "tokens": sorted(p.tokens)} for p in self.pools]
        # profit annotation: the attacker side's net token movement
        out["ucNetDeltas"] = {tok: str(d) for tok, d in sorted(self.uc_net.items()) if d}
        return out


def _timeout(report: DetectionReport, reason: str, message: str) -> DetectionReport:
    report.partial = True
    report.warnings.append({"kind": "TimeoutWarning", "reason": reason, "message": message})
    pywarnings.warn(message, TimeoutWarning, stacklevel=3)
    return report


def detect(trace: TransactionTrace, cfg: DetectConfig | None = None) -> DetectionReport:
    """Decode, slice, build graphs, recover operations, infer prices, match patterns.

    Only ingest failures propagate; everything after decoding degrades to
    warnings on the report. Once the deadline passes the report is returned
    as it stands with a TimeoutWarning.
    """
    cfg = cfg or DetectConfig()
    began = time.monotonic()
    deadline = began + cfg.timeout_secs
    report = DetectionReport(trace.tx_hash)
    ann = trace.annotations or {}
    tokens = TokenRegistry.from_annotations(ann.get("tokens", {}))
    labels = {Address(k): v for k, v in (ann.get("labels") or {}).items()}
    names = {**{Address(k): tokens.name(Address(k)) for k in (ann.get("tokens") or {})}, **labels}

    def lap(stage: str, since: float) -> float:
        now = time.monotonic()
        report.timings[stage] = (now - since) * 1000
        return now

    def note(kind: str, message: str, **extra):
        report.warnings.append({"kind": kind, "message": message, **extra})

    # decode (fatal on failure)
    raw: list[str] = []
    transfers = decode_transfers(trace, warnings=raw)
    uc = identify_user_controlled(trace, routers=known_routers() | {Address(a) for a in ann.get("routers", [])})
    report.user_controlled = uc
    invocations = slice_user_invocations(trace, uc, transfers, raw)
    for msg in raw:
        note(msg.split(":", 1)[0] if msg.startswith("MalformedLog") else "Ingest", msg)
    balances, _ = net_deltas(transfers)
    for (acct, tok), d in balances.items():
        if acct in uc:
            report.uc_net[tok] = report.uc_net.get(tok, 0) + d
    t = lap("decodeMs", began)

    graphs = [build_graph(inv, uc) for inv in invocations]
    report.graphs = graphs
    t = lap("graphMs", t)

    try:
        for g in graphs:
            try:
                ops, pools = recover_all(g, budget=cfg.search_budget, deadline=deadline, require_active=cfg.require_active)
            except SearchBudgetExceeded as exc:
                ops, pools = recover_all(g, skip_swaps=True, require_active=cfg.require_active)
                report.partial = True
                msg = f"swap search in invocation {g.invocation} gave up after {exc.visited} paths; swaps skipped"
                report.warnings.append(
                    {"kind": "TimeoutWarning", "reason": "search-budget", "message": msg, "invocation": g.invocation}
                )
                pywarnings.warn(msg, TimeoutWarning, stacklevel=2)
            report.operations.extend(ops)
            report.pools.extend(pools)
            if time.monotonic() > deadline:
                raise ScanTimeout("deadline passed during operation recovery")
    except ScanTimeout as exc:
        lap("recoverMs", t)
        return _timeout(report, "deadline", str(exc))
    t = lap("recoverMs", t)

    try:
        models = load_models(list(ann.get("models", [])) + list(cfg.models))
    except (KeyError, ValueError) as exc:
        note("ModelError", f"price model configuration rejected: {exc}")
        models = {}
    try:
        report.verdicts = infer_price_changes(
            report.operations,
            report.pools,
            invocations,
            cfg.bundles,
            cfg.backend,
            models=models,
            uc=uc.accounts,
            tokens=tokens,
            labels=labels,
            warnings=report.warnings,
            deadline=deadline,
            transport=cfg.transport,
            signatures=cfg.signatures,
        )
    except ScanTimeout as exc:
        lap("inferMs", t)
        return _timeout(report, "deadline", str(exc))
    except PriceScopeError as exc:
        note(type(exc).__name__, f"price inference failed: {exc}")
    t = lap("inferMs", t)
    if time.monotonic() > deadline:
        return _timeout(report, "deadline", "deadline passed during price inference")

    report.findings = match_patterns(report.operations, report.verdicts, min_confidence=cfg.min_confidence, names=names)
    lap("matchMs", t)
    return report
