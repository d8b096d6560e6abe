"""RK4 endpoint error against step size on the nominal parameter set."""
import argparse

import numpy as np

from bsfobs.params import nominal_parameters
from bsfobs.sim import Constant, Signals, Sinusoid, integrate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--out", default="convergence.csv")
    args = ap.parse_args()

    p = nominal_parameters()
    signals = Signals(Constant(0.1), Sinusoid(0.5, 0.3, 12.0), Sinusoid(20.0, 4.0, 24.0))
    x0 = (0.05, 20.0, 20.0)
    steps = [0.4, 0.2, 0.1, 0.05, 0.025]
    ref = integrate(x0, signals, p, args.t_end, steps[-1] / 8).x[-1]
    errors = [float(np.abs(integrate(x0, signals, p, args.t_end, dt).x[-1] - ref).max()) for dt in steps]
    with open(args.out, "w") as fh:
        fh.write("dt,endpoint_error,ratio\n")
        for i, (dt, e) in enumerate(zip(steps, errors)):
            ratio = errors[i - 1] / e if i else float("nan")
            fh.write(f"{dt!r},{e!r},{ratio!r}\n")
            print(f"dt={dt:<6} error={e:.3e} ratio={ratio:.2f}")


if __name__ == "__main__":
    main()
