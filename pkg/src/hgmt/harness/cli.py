"""Command-line driver: ``hgmt verify``, ``hgmt run-all``, ``hgmt scene validate``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from ..report import SCHEMA_VERSION
from .scenes import ConfigError, load_config
from .verify import verify

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def default_config_dir() -> Path:
    return Path(str(resources.files("hgmt") / "configs"))


def _write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")


def run_one(path) -> dict:
    """Run one config file; never raises.  Returns a summary row plus report text."""
    path = Path(path)
    row = {"config": path.name}
    try:
        cfg = load_config(path)
        row["lemma"] = cfg["lemma"]
        row["expect"] = cfg.get("expect", "pass")
        rep = verify(cfg)
    except (ConfigError, OSError) as exc:
        row.update({"error": str(exc), "pass": False, "outcome_ok": False, "status": "config_error"})
        return row
    except Exception as exc:  # isolation: one broken scene must not stop the suite
        row.update({"error": f"{type(exc).__name__}: {exc}", "pass": False, "outcome_ok": False,
                    "status": "runtime_error"})
        return row
    row["pass"] = rep.pass_
    row["hypotheses_met"] = rep.hypotheses_met
    row["violations"] = rep.violations
    row["outcome_ok"] = rep.pass_ == (row["expect"] == "pass")
    row["status"] = "ok"
    row["report"] = rep.to_json()
    return row


def run_all(config_dir, summary_path=None, report_dir=None, jobs: int = 1) -> int:
    """Run every ``*.json`` in config_dir; 0 iff every outcome matches its expectation.

    Configs marked ``"expect": "fail"`` are negative controls: they count as
    correct when their report fails.
    """
    config_dir = Path(config_dir)
    if not config_dir.is_dir():
        print(f"not a directory: {config_dir}", file=sys.stderr)
        return EXIT_USAGE
    files = sorted(config_dir.glob("*.json"))
    if report_dir is None and summary_path is not None:
        report_dir = Path(summary_path).parent / "reports"
    if jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(run_one, files))
    else:
        rows = [run_one(f) for f in files]
    for row in rows:
        text = row.pop("report", None)
        if text is not None and report_dir is not None:
            _write(Path(report_dir) / row["config"], text)
        flag = "ok  " if row["outcome_ok"] else "FAIL"
        print(f"{flag} {row['config']}: pass={row['pass']} expect={row.get('expect', '?')}"
              + (f" ({row['error']})" if "error" in row else ""))
    summary = {"schema_version": SCHEMA_VERSION, "config_dir": config_dir.name, "results": rows,
               "all_ok": all(r["outcome_ok"] for r in rows)}
    if summary_path is not None:
        _write(summary_path, json.dumps(summary, sort_keys=True, indent=2))
    if any(r["status"] == "config_error" for r in rows):
        return EXIT_USAGE
    return EXIT_PASS if summary["all_ok"] else EXIT_FAIL


def _cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = verify(cfg)
    text = rep.to_json()
    if args.out:
        _write(args.out, text)
    else:
        print(text)
    print(f"{cfg['lemma']}: {'pass' if rep.pass_ else 'fail'} (violations={rep.violations})",
          file=sys.stderr)
    return EXIT_PASS if rep.pass_ else EXIT_FAIL


def _cmd_run_all(args) -> int:
    d = args.dir if args.dir is not None else default_config_dir()
    return run_all(d, args.summary, args.reports, args.jobs)


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.file)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"valid: {cfg['name']} ({cfg['lemma']})")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hgmt", description="Heisenberg-group lemma verification harness")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run one scene config")
    v.add_argument("--config", required=True)
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify)
    r = sub.add_parser("run-all", help="run every config in a directory")
    r.add_argument("--dir", help="config directory (default: bundled suite)")
    r.add_argument("--summary")
    r.add_argument("--reports", help="report directory (default: next to the summary)")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=_cmd_run_all)
    s = sub.add_parser("scene", help="scene utilities")
    ssub = s.add_subparsers(dest="scene_command", required=True)
    sv = ssub.add_parser("validate", help="schema-check a config")
    sv.add_argument("file")
    sv.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
