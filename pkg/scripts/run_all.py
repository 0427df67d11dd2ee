#!/usr/bin/env python3
"""Run every example config in scripts/configs and summarize the outcomes.

Each config gets its own output directory under --out (default: out/),
holding report.json and summary.csv. The script exits with the worst
exit code seen, so it can gate CI.
"""

import argparse
import sys
import time
from pathlib import Path

from gsaudit.cli import main as cli_main

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out", help="root directory for per-config outputs")
    parser.add_argument("--threads", type=int, default=None, help="worker thread count")
    parser.add_argument(
        "--only", default=None, help="substring filter on config file names"
    )
    args = parser.parse_args(argv)

    configs = sorted(CONFIG_DIR.glob("*.json"))
    if args.only is not None:
        configs = [p for p in configs if args.only in p.stem]
    if not configs:
        print("no configs matched", file=sys.stderr)
        return 2

    worst = 0
    outcomes = []
    for path in configs:
        out_dir = Path(args.out) / path.stem
        cli_args = ["run", str(path), "--out", str(out_dir)]
        if args.threads is not None:
            cli_args += ["--threads", str(args.threads)]
        started = time.perf_counter()
        code = cli_main(cli_args)
        elapsed = time.perf_counter() - started
        outcomes.append((path.stem, code, elapsed))
        worst = max(worst, code)

    width = max(len(name) for name, _, _ in outcomes)
    print()
    for name, code, elapsed in outcomes:
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{name:<{width}}  {status:<7} {elapsed:7.1f}s")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
