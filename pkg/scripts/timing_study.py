"""Min, mean and max build+solve times across network sizes."""
import argparse
from pathlib import Path

from flexopf import presets
from flexopf.analysis import TIMING_COLUMNS, records_to_csv, timing_study

# wind bus and flexible loads per case
SETUP = {"case9": ((3,), (5,)), "case14": ((3,), (9,)), "case24_ieee_rts": ((7,), (3,)),
         "case30": ((2,), (7,)), "case39": ((30,), (8,)), "case57": ((3,), (8,)),
         "case118": ((10,), (54,)), "case300": ((186, 191), (5, 20))}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/timing.csv"))
    ap.add_argument("--cases", default=",".join(SETUP))
    ap.add_argument("--scenarios", type=int, default=50)
    ap.add_argument("--horizon", type=int, default=12)
    ap.add_argument("--repetitions", type=int, default=3)
    args = ap.parse_args(argv)
    recs = []
    for name in args.cases.split(","):
        wind, d0 = SETUP[name]
        net, sc = presets.table_case(name, wind, 0.1, d0, args.scenarios, args.horizon)
        rec = timing_study([(name, net.with_flexibility(0.1, d0), sc)], args.repetitions)[0]
        print(f"{name:16s} rows {rec['rows']:7d}  min {rec['min_seconds']:7.2f}s  "
              f"mean {rec['mean_seconds']:7.2f}s  max {rec['max_seconds']:7.2f}s", flush=True)
        recs.append(rec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(records_to_csv(recs, TIMING_COLUMNS))


if __name__ == "__main__":
    main()
