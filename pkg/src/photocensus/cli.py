"""Command-line entry points tying the modules into reproducible workflows.

Subcommands compose: simulate -> ingest -> filter -> cluster (sim mode, or
interactively via serve) -> estimate -> report. Exit codes: 0 success,
1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .census import (
    NoRecaptureError,
    capture_summary,
    export_geojson,
    individual_stats,
    lincoln_petersen,
    strategy_stats,
)
from .ingest import ManifestError, parse_manifest
from .lca.engine import LcaConfig, LcaEngine, init_graph
from .matchers import SimOracleModel, SimRanker, SimVerifier, SimulatedHumanChannel
from .pipeline import FilterConfig, funnel_table, run_funnel
from .reporting import (
    build_report_document,
    render_figures,
    summary_table,
    write_cluster_csv,
    write_report_json,
    write_strategy_csv,
)
from .simulate import SimConfig, generate, read_truth
from .state import ReviewLogWriter, StateError, load_state, save_state

logger = logging.getLogger(__name__)


class CliError(Exception):
    """Input or configuration problem; exits with code 1."""


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise CliError(f"config file not found: {config_path}")
    try:
        raw = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise CliError("config file must hold a JSON object")
    return raw


def db_paths(db: str) -> dict[str, Path]:
    root = Path(db)
    return {
        "root": root,
        "dataset": root / "dataset.json",
        "funnel": root / "funnel.json",
        "run_state": root / "run_state.json",
        "result": root / "result.json",
        "reviews": root / "reviews.jsonl",
        "estimate": root / "estimate.json",
        "config": root / "config.json",
    }


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise CliError(f"{path} missing; run `{hint}` first")
    return path


def _emit(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(human)


# --- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    config_raw = load_config(args.config).get("sim", {})
    if args.seed is not None:
        config_raw["seed"] = args.seed
    try:
        sim_config = SimConfig.from_dict(config_raw)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid sim config: {exc}")
    out_dir = Path(args.out)
    output = generate(sim_config)
    paths = output.write(out_dir)
    payload = {
        "annotations": len(output.annotations),
        "cameras": len(output.cameras),
        "individuals": len(set(output.truth.values())),
        "bursts": len(output.bursts),
        "manifest": str(paths["manifest"]),
        "cameras_file": str(paths["cameras"]),
        "truth": str(paths["truth"]),
    }
    _emit(
        args,
        payload,
        f"wrote {payload['annotations']} annotations from {payload['individuals']} individuals "
        f"across {payload['cameras']} cameras to {out_dir}",
    )
    return 0


def cmd_ingest(args) -> int:
    paths = db_paths(args.db)
    try:
        dataset, report = parse_manifest(args.manifest, args.cameras)
    except ManifestError as exc:
        raise CliError(str(exc))
    paths["root"].mkdir(parents=True, exist_ok=True)
    save_state(dataset, paths["dataset"])
    for issue in report.issues[:20]:
        print(f"rejected {issue.path}:{issue.line_no}: {issue.reason}", file=sys.stderr)
    if report.rejected > 20:
        print(f"... and {report.rejected - 20} more rejected lines", file=sys.stderr)
    payload = {
        "accepted": report.accepted,
        "rejected": report.rejected,
        "cameras": len(dataset.cameras),
        "dataset": str(paths["dataset"]),
    }
    _emit(args, payload, f"ingested {report.accepted} annotations ({report.rejected} rejected), {len(dataset.cameras)} cameras")
    return 0


def _filter_config(args) -> FilterConfig:
    raw = load_config(args.config).get("filter", {})
    try:
        return FilterConfig.from_dict(raw)
    except (ValueError, KeyError) as exc:
        raise CliError(f"invalid filter config: {exc}")


def cmd_filter(args) -> int:
    paths = db_paths(args.db)
    dataset = load_state(_require(paths["dataset"], "photocensus ingest"))
    filter_config = _filter_config(args)
    final, report = run_funnel(dataset, filter_config)
    save_state(report, paths["funnel"])
    config_doc = json.loads(paths["config"].read_text()) if paths["config"].is_file() else {}
    config_doc["filter"] = filter_config.to_dict()
    paths["config"].write_text(json.dumps(config_doc, indent=2, sort_keys=True))
    payload = {
        "stages": [
            {"name": s.name, "input": s.input_count, "output": s.output_count, "enabled": s.enabled}
            for s in report.stages
        ],
        "final": len(final),
        "encounters": len(report.encounters),
    }
    _emit(args, payload, funnel_table(report))
    return 0


def _oracle_model(args, config_raw: dict, truth: dict[str, str], seed: int) -> SimOracleModel:
    oracle_raw = dict(config_raw.get("oracle", {}))
    oracle_raw.pop("truth_path", None)
    oracle_raw.setdefault("seed", seed)
    try:
        return SimOracleModel(truth=truth, **oracle_raw)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid oracle config: {exc}")


def _load_truth(args, config_raw: dict, dataset) -> dict[str, str]:
    truth_path = config_raw.get("oracle", {}).get("truth_path")
    if truth_path is None:
        candidate = Path(dataset.provenance.annotations_path).parent / "truth.csv"
        if not candidate.is_file():
            raise CliError(
                "no ground truth found: place truth.csv beside the manifest or set oracle.truth_path in the config"
            )
        truth_path = candidate
    truth_file = Path(truth_path)
    if not truth_file.is_file():
        raise CliError(f"truth file not found: {truth_file}")
    return read_truth(truth_file)


def cmd_cluster(args) -> int:
    paths = db_paths(args.db)
    dataset = load_state(_require(paths["dataset"], "photocensus ingest"))
    funnel = load_state(_require(paths["funnel"], "photocensus filter"))
    config_raw = load_config(args.config)

    lca_raw = dict(config_raw.get("lca", {}))
    if args.seed is not None:
        lca_raw["seed"] = args.seed
    try:
        lca_config = LcaConfig.from_dict(lca_raw)
    except (ValueError, KeyError) as exc:
        raise CliError(f"invalid lca config: {exc}")

    if args.mode == "interactive":
        return _cluster_interactive(args, paths, dataset, config_raw, lca_config)

    final_ids = list(funnel.final_annotation_ids)
    annotations = [dataset.annotation(a) for a in final_ids]
    truth = _load_truth(args, config_raw, dataset)
    missing = [a for a in final_ids if a not in truth]
    if missing:
        raise CliError(f"{len(missing)} filtered annotation(s) missing from ground truth, e.g. {missing[:3]}")
    model = _oracle_model(args, config_raw, truth, lca_config.seed)

    resume = False
    if paths["run_state"].is_file():
        previous = load_state(paths["run_state"])
        if previous.phase != "converged":
            resume = True
    if not annotations:
        raise CliError("funnel produced no annotations; nothing to cluster")

    if resume:
        log_writer = ReviewLogWriter(paths["reviews"])
        engine = LcaEngine.from_state(
            previous,
            verifier=SimVerifier(model),
            review_channel=SimulatedHumanChannel(model),
            log_writer=log_writer,
        )
    else:
        paths["reviews"].unlink(missing_ok=True)
        log_writer = ReviewLogWriter(paths["reviews"])
        graph = init_graph(annotations, SimRanker(model), lca_config)
        engine = LcaEngine(
            graph,
            lca_config,
            verifier=SimVerifier(model),
            review_channel=SimulatedHumanChannel(model),
            log_writer=log_writer,
            extra={"mode": "sim", "oracle": model.to_dict()},
        )
    result = engine.run()
    save_state(engine.to_state(), paths["run_state"])
    save_state(result, paths["result"])
    config_doc = json.loads(paths["config"].read_text()) if paths["config"].is_file() else {}
    config_doc["lca"] = lca_config.to_dict()
    config_doc["oracle"] = model.to_dict()
    paths["config"].write_text(json.dumps(config_doc, indent=2, sort_keys=True))

    payload = {
        "clusters": result.cluster_count,
        "algorithmic_reviews": result.algorithmic_reviews,
        "human_reviews": result.human_reviews,
        "total_reviews": result.total_reviews,
        "automation_rate": result.automation_rate,
        "converged": result.converged,
        "resumed": resume,
    }
    _emit(
        args,
        payload,
        f"{result.cluster_count} clusters from {len(annotations)} annotations; "
        f"{result.algorithmic_reviews} algorithmic + {result.human_reviews} human reviews "
        f"(automation {result.automation_rate * 100:.1f}%)",
    )
    return 0


def _cluster_interactive(args, paths, dataset, config_raw, lca_config) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    from .service import ManagedRun

    truth = _load_truth(args, config_raw, dataset)
    state = ServiceState(lease_ttl=args.lease_ttl, db_dir=paths["root"])
    registered = state.register_dataset(dataset, truth, dataset_id="default")
    app = create_app(state)
    filter_config = _filter_config(args)

    run = ManagedRun(
        "interactive",
        registered,
        filter_config,
        lca_config,
        config_raw.get("oracle", {}),
        "interactive",
        lease_ttl=args.lease_ttl,
        clock=state.clock,
        db_dir=paths["root"],
    )
    state.runs[run.run_id] = run
    run.start()
    print(f"review queue live: POST decisions via http://127.0.0.1:{args.port}/api/runs/{run.run_id}", file=sys.stderr)
    try:
        uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    finally:
        state.close()
    return 0


def _load_events(path: str) -> dict[str, int]:
    events_file = Path(path)
    if not events_file.is_file():
        raise CliError(f"events file not found: {events_file}")
    events: dict[str, int] = {}
    with events_file.open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "annotation_id":
                continue
            if len(row) < 2:
                raise CliError(f"malformed events row: {row!r}")
            try:
                events[row[0]] = int(row[1])
            except ValueError:
                raise CliError(f"event must be 1 or 2, got {row[1]!r}")
    return events


def cmd_estimate(args) -> int:
    paths = db_paths(args.db)
    result = load_state(_require(paths["result"], "photocensus cluster"))
    events = _load_events(args.events)
    config_raw = load_config(args.config)
    chapman = bool(config_raw.get("estimate", {}).get("chapman", False))
    try:
        summary = capture_summary(result.clustering, events)
        estimate = lincoln_petersen(summary, chapman=chapman)
    except (ValueError, NoRecaptureError) as exc:
        raise CliError(str(exc))
    doc = {
        "capture_summary": {"n1": summary.n1, "n2": summary.n2, "m": summary.m},
        "estimate": estimate.to_dict(),
    }
    paths["estimate"].write_text(json.dumps(doc, indent=2, sort_keys=True))
    low, high = estimate.ci95
    _emit(
        args,
        doc,
        f"n1={summary.n1} n2={summary.n2} m={summary.m} -> "
        f"N = {estimate.n_hat:.1f} +/- {estimate.stderr:.1f} (95% CI {low:.1f}-{high:.1f})",
    )
    return 0


def cmd_report(args) -> int:
    paths = db_paths(args.db)
    dataset = load_state(_require(paths["dataset"], "photocensus ingest"))
    funnel = load_state(paths["funnel"]) if paths["funnel"].is_file() else None
    result = load_state(paths["result"]) if paths["result"].is_file() else None

    estimate = None
    if args.events and result is not None:
        events = _load_events(args.events)
        try:
            estimate = lincoln_petersen(capture_summary(result.clustering, events))
        except (ValueError, NoRecaptureError) as exc:
            raise CliError(str(exc))
    elif paths["estimate"].is_file():
        from .census import PopulationEstimate

        saved = json.loads(paths["estimate"].read_text())["estimate"]
        estimate = PopulationEstimate(
            n_hat=saved["n_hat"], stderr=saved["stderr"], ci95=tuple(saved["ci95"]), method=saved["method"]
        )

    individuals = strategies = None
    if result is not None and funnel is not None:
        encounters = list(funnel.encounters)
        individuals = individual_stats(result.clustering, encounters)
        strategies = strategy_stats(result.clustering, encounters, dataset.cameras)

    config_doc = json.loads(paths["config"].read_text()) if paths["config"].is_file() else {}
    doc = build_report_document(funnel, result, estimate, individuals, strategies, config_doc)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(doc, out_dir / "report.json")
    written = [str(out_dir / "report.json")]
    if individuals is not None:
        write_cluster_csv(individuals, out_dir / "clusters.csv")
        written.append(str(out_dir / "clusters.csv"))
    if strategies is not None:
        write_strategy_csv(strategies, out_dir / "strategies.csv")
        written.append(str(out_dir / "strategies.csv"))
    written += [str(p) for p in render_figures(individuals, strategies, out_dir)]

    if args.geojson and result is not None and funnel is not None:
        doc_geo = export_geojson(result.clustering, list(funnel.encounters), dataset.cameras)
        Path(args.geojson).write_text(json.dumps(doc_geo, indent=2) + "\n")
        written.append(args.geojson)

    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print(summary_table(doc))
        print("\nwrote:")
        for path in written:
            print(f"  {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    state = ServiceState(lease_ttl=args.lease_ttl, db_dir=Path(args.db) if args.db else None)
    if args.manifest and args.cameras:
        dataset, report = parse_manifest(args.manifest, args.cameras)
        truth = read_truth(args.truth) if args.truth else None
        state.register_dataset(dataset, truth, report.rejected, dataset_id="default")
        print("registered dataset 'default'", file=sys.stderr)
    app = create_app(state)
    try:
        uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    finally:
        state.close()
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photocensus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    p.add_argument("--config", help="JSON config file (uses the 'sim' section)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="parse and validate a manifest into a dataset snapshot")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--db", required=True, help="state directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter", help="run the annotation funnel")
    p.add_argument("--db", required=True)
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("cluster", help="run identity clustering over the filtered annotations")
    p.add_argument("--db", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["sim", "interactive"], default="sim")
    p.add_argument("--port", type=int, default=8077, help="interactive mode: review API port")
    p.add_argument("--lease-ttl", type=float, default=120.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("estimate", help="two-event capture-recapture population estimate")
    p.add_argument("--db", required=True)
    p.add_argument("--events", required=True, help="CSV of annotation_id,event")
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", help="write the consolidated report, tables, and figures")
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--events")
    p.add_argument("--geojson", help="also export encounters as GeoJSON to this path")
    p.add_argument("--config")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="host the review/cluster HTTP API")
    p.add_argument("--db")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--lease-ttl", type=float, default=120.0)
    p.add_argument("--manifest")
    p.add_argument("--cameras")
    p.add_argument("--truth")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ManifestError, StateError, NoRecaptureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected runtime failure
        logger.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
