"""Total energy vs per-device power budget (23, 25, 29, 32 dBm by default)."""

import argparse

from fedcran.harness import (
    SWEEP_COLUMNS,
    ExperimentSpec,
    dbm_to_watts,
    load_config,
    run_experiment,
    write_rows,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--values-dbm", type=float, nargs="+", default=[23, 25, 29, 32])
    ap.add_argument("--realizations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="power_sweep.csv")
    args = ap.parse_args()

    scn, _, _, opt_cfg = load_config(args.config)
    spec = ExperimentSpec(sweep="P_bar",
                          values=[dbm_to_watts(v) for v in args.values_dbm],
                          realizations=args.realizations, seed=args.seed,
                          workers=args.workers)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    if failures:
        print(f"{len(failures)} realization(s) failed")
    write_rows(rows, SWEEP_COLUMNS, args.out, "csv")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
