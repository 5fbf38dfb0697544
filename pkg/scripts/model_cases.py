"""Total energy across the batch-16 QNN model presets (cases 1-5)."""

import argparse

from fedcran.harness import (
    SWEEP_COLUMNS,
    ExperimentSpec,
    load_config,
    run_experiment,
    write_rows,
)

CASES = ["case1_bs16", "case2_bs16", "case3_bs16", "case4_bs16", "case5_bs16"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--cases", nargs="+", default=CASES)
    ap.add_argument("--realizations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="model_cases.csv")
    args = ap.parse_args()

    scn, _, _, opt_cfg = load_config(args.config)
    spec = ExperimentSpec(sweep="model_case", values=args.cases,
                          realizations=args.realizations, seed=args.seed,
                          workers=args.workers)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    if failures:
        print(f"{len(failures)} realization(s) failed")
    write_rows(rows, SWEEP_COLUMNS, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
