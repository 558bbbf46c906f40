"""Run the full pipeline on every bundled scenario and write one report per scenario.

    python scripts/run_all_scenarios.py --out out/scenarios [--cells 400] [--parallel 3]
"""

import argparse
import json
from pathlib import Path

from q1dshock.config import bundled_scenarios, load_config
from q1dshock.experiments import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/scenarios")
    ap.add_argument("--cells", type=int, default=None, help="override n_cells for quicker runs")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()

    configs = [load_config(name) for name in bundled_scenarios()]
    if args.cells:
        configs = [c.with_overrides(n_cells=args.cells) for c in configs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg, rep in zip(configs, sweep(configs, args.parallel)):
        (out / f"{cfg.name}.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
        print(f"{cfg.name:14s} {rep.verdict:12s} lambda_fit={rep.lambda_fit:.4g} "
              f"lambda0={rep.lambda0:.4g} radius={rep.spectral_radius:.4g} {rep.reason}")


if __name__ == "__main__":
    main()
