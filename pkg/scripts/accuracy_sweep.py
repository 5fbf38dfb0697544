"""Total energy vs the learning-accuracy target; tighter targets cost rounds."""

import argparse

from fedcran.harness import (
    SWEEP_COLUMNS,
    ExperimentSpec,
    load_config,
    run_experiment,
    write_rows,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--values", type=float, nargs="+",
                    default=[0.005, 0.01, 0.02, 0.05])
    ap.add_argument("--realizations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="accuracy_sweep.csv")
    args = ap.parse_args()

    scn, _, _, opt_cfg = load_config(args.config)
    spec = ExperimentSpec(sweep="eps_target", values=args.values,
                          realizations=args.realizations, seed=args.seed,
                          workers=args.workers)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    if failures:
        print(f"{len(failures)} realization(s) failed")
    write_rows(rows, SWEEP_COLUMNS, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
