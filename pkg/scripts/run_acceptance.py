"""Run the acceptance criteria and write the JSON report."""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from rdiag.acceptance import DEFAULT_SEED, dumps, run_suite


@dataclass
class AcceptanceConfig:
    suite: str = "all"
    seed: int = DEFAULT_SEED
    quick: bool = False
    workers: int = 1
    output: Path = Path("acceptance.json")


def run(cfg: AcceptanceConfig) -> bool:
    results = run_suite(cfg.suite, cfg.seed, cfg.quick, cfg.workers)
    for r in results:
        print(f"{r.line()} ({r.seconds:.1f}s)")
    cfg.output.write_text(dumps([r.body() for r in results]) + "\n")
    return all(r.passed for r in results)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--suite", default="all")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", type=Path, default=Path("acceptance.json"))
    a = p.parse_args(argv)
    return 0 if run(AcceptanceConfig(a.suite, a.seed, a.quick, a.workers, a.output)) else 1


if __name__ == "__main__":
    sys.exit(main())
