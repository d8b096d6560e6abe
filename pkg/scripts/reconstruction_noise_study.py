"""Biomass reconstruction error against measurement noise and differentiator window.

Noise is added to both temperature channels; each cell averages a few seeds.
"""
import argparse
import itertools
import warnings

import numpy as np

from bsfobs.estimator import DifferentiatorSpec, error_metrics, reconstruct
from bsfobs.params import nominal_parameters
from bsfobs.sim import NoiseSpec, Signals, integrate, sample_measurements


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out", default="noise_study.csv")
    args = ap.parse_args()

    p = nominal_parameters()
    traj = integrate((0.05, 20.0, 20.0), Signals.constant(0.1, 0.5, 20.0), p, args.t_end, 0.01)
    stds = [0.0, 1e-4, 1e-3, 1e-2]
    windows = [11, 51, 101, 201, 401]
    with open(args.out, "w") as fh:
        fh.write("std,window,median_abs_error,max_abs_error\n")
        for std, window in itertools.product(stds, windows):
            med, mx = [], []
            for seed in range(args.seeds):
                meas = sample_measurements(traj, NoiseSpec(std, std, 0.0, seed))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    est = reconstruct(meas, p, DifferentiatorSpec(window, 3))
                err = np.abs(est.x1_est - traj.x[:, 0])[est.reliable]
                med.append(np.median(err))
                mx.append(error_metrics(est, traj.x[:, 0]).max_abs)
            fh.write(f"{std!r},{window},{np.mean(med)!r},{np.mean(mx)!r}\n")
            print(f"std={std:<7} window={window:<4} median={np.mean(med):.2e} max={np.mean(mx):.2e}")


if __name__ == "__main__":
    main()
