"""Decay curves of one window with both rate estimators side by side.

The regression slope and the tail-max estimate are printed for every triple
next to the gap of the same product over the same n-range.
"""

import argparse

from hmmforget.memloss import (
    delta_curve,
    delta_tilde_curve,
    estimate_rate,
    matched_gap,
    write_curves_csv,
)
from hmmforget.model import build_model, read_model
from hmmforget.simulate import derive_seed, past_window, sample_path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", help="model JSON (default: the two-state test model)")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n-max", type=int, default=400)
    ap.add_argument("--tilde", action="store_true", help="use observation triples")
    ap.add_argument("--csv", default="decay_rates.csv")
    args = ap.parse_args()

    model = read_model(args.model) if args.model else \
        build_model([[0.9, 0.1], [0.2, 0.8]], [[0.9, 0.1], [0.1, 0.9]])
    n = args.n_max - 1
    window = past_window(sample_path(model, n, derive_seed(args.seed, 1)), n)
    make = delta_tilde_curve if args.tilde else delta_curve
    curves = make(model, window, n_max=args.n_max)
    print("triple   regression  tail-max   matched gap")
    for cv in curves:
        reg = estimate_rate(cv)
        tail = estimate_rate(cv, method="tail-max")
        gap = matched_gap(model, window, reg) if not reg.all_censored else float("nan")
        print(f"{cv.label:7s}  {reg.tau_hat:10.4f}  {tail.tau_hat:9.4f}  {gap:10.4f}")
    with open(args.csv, "w") as fh:
        write_curves_csv(curves, fh)


if __name__ == "__main__":
    main()
