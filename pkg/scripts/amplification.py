"""Table of the amplification constant over block sizes and variances."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from rdiag.microstates import amplification_constant


@dataclass
class AmplificationConfig:
    d_values: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    v_values: list[float] = field(default_factory=lambda: [1.0, 2.0])


def run(cfg: AmplificationConfig) -> list[dict]:
    return [amplification_constant(d, v) for d in cfg.d_values for v in cfg.v_values]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--d", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--v", type=float, nargs="+", default=[1.0, 2.0])
    a = p.parse_args(argv)
    rows = run(AmplificationConfig(a.d, a.v))
    for r in rows:
        print(json.dumps({k: r[k] for k in ("d", "v", "constant", "magnitude", "pass")}))
    return 0 if all(r["pass"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
