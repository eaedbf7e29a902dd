#!/usr/bin/env python3
"""Run the three reference coefficient competitions and check the decay law.

Each competition starts from fixed probabilities on a small set of
eigenvalue labels, integrates the coefficient ODE to t = 10, and reports
the winner, its final probability, and the measured late-time decay rate
of every loser against the predicted -2|a - a_win|^2.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from eigentow import CoefficientState, coeff_simulate, probabilities
from eigentow.io import save_coefficient_csv

COMPETITIONS = [
    ((0.501, 0.499), 0),
    ((13 / 30, 10 / 30, 7 / 30), 1),
    ((14 / 30, 10 / 30, 6 / 30), 0),
]


def measured_decay_rates(traj, winner: int, threshold: float = 0.99):
    """Log-slope of each losing probability after the winner passes threshold."""
    times = np.array([s.time for s in traj])
    probs = np.array([probabilities(s) for s in traj])
    start = int(np.argmax(probs[:, winner] > threshold))
    t_fit = times[start:]
    rates = {}
    for a in range(probs.shape[1]):
        if a == winner:
            continue
        with np.errstate(divide="ignore"):
            logs = np.log(probs[start:, a])
        keep = np.isfinite(logs)
        rates[a] = float(np.polyfit(t_fit[keep], logs[keep], 1)[0])
    return rates


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--out-dir", default=None, help="write trajectory CSVs here")
    args = ap.parse_args()

    for idx, (probs0, expected) in enumerate(COMPETITIONS, start=1):
        eigvals = [[float(k)] for k in range(len(probs0))]
        cs = CoefficientState.from_probabilities(eigvals, probs0)
        traj = coeff_simulate(cs, args.dt, args.t_end)
        final = probabilities(traj[-1])
        winner = int(np.argmax(final))
        print(f"competition {idx}: start={tuple(round(p, 4) for p in probs0)}")
        print(
            f"  winner = state {winner} (expected {expected}),"
            f" p_winner(t={args.t_end:g}) = {final[winner]:.6f}"
        )
        for a, rate in measured_decay_rates(traj, winner).items():
            predicted = -2.0 * (a - winner) ** 2
            rel = abs(rate - predicted) / abs(predicted)
            print(
                f"  loser {a}: measured decay {rate:+.4f},"
                f" predicted {predicted:+.4f} (rel err {rel:.2%})"
            )
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            times = [s.time for s in traj]
            save_coefficient_csv(
                times,
                np.array([probabilities(s) for s in traj]),
                out / f"competition_{idx}.csv",
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
