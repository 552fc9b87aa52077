"""pricescope command line: scan, synth, freeze, report."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

from . import config as cfgmod
from .amm.dataset import DEFAULT_RANGE, emit_finetune_jsonl, generate_finetune_pairs, load_template
from .chain.rpc import fetch_trace
from .chain.trace import atomic_write_text, load_trace, save_trace
from .errors import PriceScopeError
from .graph import to_dot
from .inference.llm import InferenceBackendConfig
from .inference.sources import load_bundles
from .chain.tokens import TokenRegistry
from .pipeline import DetectConfig, detect

log = logging.getLogger("pricescope")

EXIT_CLEAN, EXIT_FATAL, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would read as "findings present"
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pricescope", description="Detect price manipulation in DeFi transactions.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--config", help="settings file (default ./pricescope.toml)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    scan = sub.add_parser("scan", help="scan one transaction or a directory of fixtures")
    src = scan.add_mutually_exclusive_group()
    src.add_argument("--fixture", help="trace fixture JSON")
    src.add_argument("--tx", help="transaction hash, fetched over --rpc")
    src.add_argument("--batch", metavar="DIR", help="scan every *.json fixture in DIR, JSONL output")
    scan.add_argument("--rpc", help=f"archive node endpoint (env {cfgmod.RPC_ENV})")
    scan.add_argument("--backend", choices=("analytic", "llm-type1", "llm-type2", "auto"))
    scan.add_argument("--llm-endpoint")
    scan.add_argument("--llm-model")
    scan.add_argument("--timeout", type=_positive_float, help="per-transaction cap in seconds (default 300)")
    scan.add_argument("--jobs", type=_positive_int, help="parallel transactions in batch mode")
    scan.add_argument("--dump-graph", action="store_true", help="write one DOT file per user invocation")
    scan.add_argument("--models", help="JSON list of price models to add to the trace's own")
    scan.add_argument("--sources", help="directory of verified source bundles, one subdirectory per contract")
    scan.add_argument("--min-confidence", type=int)
    scan.add_argument("--out", help="report path (stdout when omitted)")

    synth = sub.add_parser("synth", help="generate the fine-tuning dataset")
    synth.add_argument("--count", type=_positive_int, default=1000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--lo", type=int, default=DEFAULT_RANGE[0])
    synth.add_argument("--hi", type=int, default=DEFAULT_RANGE[1])
    synth.add_argument("--template", help="chat template file (default: bundled)")
    synth.add_argument("--out", default="finetune.jsonl")

    freeze = sub.add_parser("freeze", help="fetch a trace and store it as a replayable fixture")
    freeze.add_argument("--tx", required=True)
    freeze.add_argument("--rpc")
    freeze.add_argument("--out", required=True)
    freeze.add_argument("--timeout", type=_positive_float, default=60.0)

    report = sub.add_parser("report", help="summarise a saved report (JSON or JSONL)")
    report.add_argument("path")
    return p


# --- scan --------------------------------------------------------------------------


def _resolve_scan(args) -> cfgmod.ScanConfig:
    file_cfg = cfgmod.load_file(args.config)
    if args.fixture:
        source = ("fixture", args.fixture)
    elif args.tx:
        source = ("rpc", args.tx)
    elif args.batch:
        source = ("batch", args.batch)
    else:
        raise UsageError("scan needs one of --fixture, --tx or --batch")
    rpc_url = cfgmod.pick(args.rpc, cfgmod.RPC_ENV, file_cfg, "rpc_url")
    if source[0] == "rpc" and not rpc_url:
        raise UsageError(f"--tx needs --rpc or {cfgmod.RPC_ENV}")
    kind = cfgmod.pick(args.backend, None, file_cfg, "backend", "analytic")
    backend = InferenceBackendConfig(
        kind=kind,
        endpoint=cfgmod.pick(args.llm_endpoint, None, file_cfg, "llm_endpoint"),
        model=cfgmod.pick(args.llm_model, None, file_cfg, "llm_model", "gpt-4o"),
        max_concurrent=int(file_cfg.get("max_concurrent", 4)),
    )
    if backend.uses_llm and not backend.endpoint:
        raise UsageError(f"--backend {kind} needs --llm-endpoint (or llm_endpoint in {cfgmod.CONFIG_FILE})")
    return cfgmod.ScanConfig(
        source=source,
        backend=backend,
        timeout_secs=float(cfgmod.pick(args.timeout, None, file_cfg, "timeout", 300)),
        output_path=args.out,
        graph_dump=args.dump_graph,
        rpc_url=rpc_url,
        jobs=int(cfgmod.pick(args.jobs, None, file_cfg, "jobs", os.cpu_count() or 1)),
        models_path=cfgmod.pick(args.models, None, file_cfg, "models"),
        sources_path=cfgmod.pick(args.sources, None, file_cfg, "sources"),
        min_confidence=int(cfgmod.pick(args.min_confidence, None, file_cfg, "min_confidence", 6)),
    )


@lru_cache(maxsize=4)
def _detect_config(
    backend: InferenceBackendConfig, timeout: float, models_path, sources_path, min_confidence: int
) -> DetectConfig:
    models = json.loads(Path(models_path).read_text()) if models_path else []
    bundles = load_bundles(sources_path) if sources_path else {}
    return DetectConfig(
        backend=backend, timeout_secs=timeout, models=models, bundles=bundles, min_confidence=min_confidence
    )


def _config_key(sc: cfgmod.ScanConfig) -> tuple:
    return (sc.backend, sc.timeout_secs, sc.models_path, sc.sources_path, sc.min_confidence)


def _scan_fixture(path: str, key: tuple) -> dict:
    """Batch worker: one fixture in, one report dict (or error record) out."""
    try:
        report = detect(load_trace(path), _detect_config(*key))
    except (PriceScopeError, OSError, ValueError) as exc:
        return {"fixture": str(path), "error": f"{type(exc).__name__}: {exc}"}
    out = report.to_dict()
    out["fixture"] = str(path)
    return out


def _dump_graphs(report, trace, out_path: str | None):
    tokens = TokenRegistry.from_annotations((trace.annotations or {}).get("tokens", {}))
    labels = (trace.annotations or {}).get("labels", {})
    base = Path(out_path) if out_path else Path.cwd() / f"tg_{trace.tx_hash[2:12]}"
    written = []
    for g in report.graphs:
        path = base.with_name(f"{base.stem}.inv{g.invocation}.dot")
        atomic_write_text(path, to_dot(g, tokens, labels))
        written.append(path)
    return written


def _emit(text: str, out_path: str | None):
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def _scan_batch(sc: cfgmod.ScanConfig) -> int:
    folder = Path(sc.source[1])
    if not folder.is_dir():
        raise UsageError(f"--batch expects a directory: {folder}")
    paths = sorted(str(p) for p in folder.glob("*.json"))
    key = _config_key(sc)
    lines: list[str] = []
    findings = errors = 0

    def take(result: dict):
        nonlocal findings, errors
        if "error" in result:
            errors += 1
        elif result["findings"]:
            findings += 1
        lines.append(json.dumps(result, sort_keys=True))

    if sc.jobs <= 1:
        for path in paths:
            take(_scan_fixture(path, key))
    else:
        # bounded in-flight window keeps memory flat on long batches; output stays in input order
        with ProcessPoolExecutor(max_workers=sc.jobs) as pool:
            pending: deque = deque()
            for path in paths:
                pending.append(pool.submit(_scan_fixture, path, key))
                if len(pending) >= 4 * sc.jobs:
                    take(pending.popleft().result())
            while pending:
                take(pending.popleft().result())
    _emit("".join(line + "\n" for line in lines), sc.output_path)
    log.info("batch: %d scanned, %d with findings, %d failed", len(paths), findings, errors)
    if findings:
        return EXIT_FINDINGS
    return EXIT_FATAL if errors else EXIT_CLEAN


def cmd_scan(args) -> int:
    sc = _resolve_scan(args)
    if sc.source[0] == "batch":
        return _scan_batch(sc)
    if sc.source[0] == "fixture":
        trace = load_trace(sc.source[1])
    else:
        trace = fetch_trace(sc.rpc_url, sc.source[1])
    report = detect(trace, _detect_config(*_config_key(sc)))
    _emit(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", sc.output_path)
    if sc.graph_dump:
        for path in _dump_graphs(report, trace, sc.output_path):
            log.info("wrote %s", path)
    return EXIT_FINDINGS if report.findings else EXIT_CLEAN


# --- synth / freeze / report ---------------------------------------------------------


def cmd_synth(args) -> int:
    if args.lo >= args.hi:
        raise UsageError("--lo must be below --hi")
    template = Path(args.template).read_text() if args.template else load_template("finetune.txt")
    pairs = generate_finetune_pairs(count=args.count, seed=args.seed, amount_range=(args.lo, args.hi))
    path = emit_finetune_jsonl(pairs, template, args.out)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    print(f"{len(pairs)} examples -> {path} (sha256 {digest[:16]})")
    return EXIT_CLEAN


def cmd_freeze(args) -> int:
    file_cfg = cfgmod.load_file(args.config)
    rpc_url = cfgmod.pick(args.rpc, cfgmod.RPC_ENV, file_cfg, "rpc_url")
    if not rpc_url:
        raise UsageError(f"freeze needs --rpc or {cfgmod.RPC_ENV}")
    trace = fetch_trace(rpc_url, args.tx, timeout=args.timeout)
    save_trace(trace, args.out)
    print(f"froze {trace.tx_hash} -> {args.out}")
    return EXIT_CLEAN


def _summary(doc: dict) -> str:
    head = doc.get("txHash") or doc.get("fixture", "?")
    if "error" in doc:
        return f"{head}: error: {doc['error']}"
    lines = [f"{head}: {len(doc['operations'])} operation(s), {len(doc['verdicts'])} verdict(s), "
             f"{len(doc['findings'])} finding(s)"]
    for f in doc["findings"]:
        lines.append(f"  [{f['pattern']}/{f['family']}] {f['narrative']}")
    for w in doc.get("warnings", []):
        lines.append(f"  warning {w.get('kind')}: {w.get('message')}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    text = Path(args.path).read_text()
    try:
        docs = [json.loads(text)]
    except json.JSONDecodeError:
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    for doc in docs:
        print(_summary(doc))
    return EXIT_FINDINGS if any(d.get("findings") for d in docs) else EXIT_CLEAN


COMMANDS = {"scan": cmd_scan, "synth": cmd_synth, "freeze": cmd_freeze, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"pricescope {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PriceScopeError, OSError, ValueError) as exc:
        print(f"pricescope {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
