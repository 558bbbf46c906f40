"""Refinement table (identity residual, coefficient residual, steady drift, decay rate).

    python scripts/refinement.py --scenario stable_iso --cells 100 --levels 4
"""

import argparse
import json
from pathlib import Path

from q1dshock.config import load_config
from q1dshock.experiments import refinement_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="stable_iso")
    ap.add_argument("--cells", type=int, default=100, help="coarsest grid (cells and nodes)")
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--no-simulation", action="store_true")
    ap.add_argument("--out", default="out/refinement.json")
    args = ap.parse_args()

    cfg = load_config(args.scenario).with_overrides(n_cells=args.cells,
                                                    linear={"n_nodes": args.cells})
    table = refinement_study(cfg, args.levels, with_simulation=not args.no_simulation)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(table, indent=2, default=float))
    keys = ["n_cells", "identity_residual", "coefficient_residual", "steady_drift_max",
            "steady_drift_l1", "lambda_fit"]
    print("  ".join(f"{k:>20s}" for k in keys))
    for row in table["rows"]:
        print("  ".join(f"{row[k]:20.6g}" for k in keys))
    for k, v in table.items():
        if k.startswith("order_"):
            print(k, ", ".join(f"{o:.2f}" for o in v))


if __name__ == "__main__":
    main()
