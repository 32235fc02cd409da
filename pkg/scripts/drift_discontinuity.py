"""Averaged drift of the interval model near the degenerate endpoint.

The frozen invariant density of example21 loses its x^2 e^{-xy} component
as x -> 0+, so b_bar jumps from 2 at 0+ to 1 at 0. This script tabulates
b_bar on a grid approaching the endpoint and runs the one-sided probe.

Usage: python scripts/drift_discontinuity.py [--out table.csv]
"""

import argparse
import sys

import numpy as np

from slowfast.averaging import averaged_drift, discontinuity_probe
from slowfast.models import get_builtin


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="optional CSV destination")
    args = parser.parse_args(argv)

    model = get_builtin("example21")
    xs = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 13)])
    rows = [(float(x), averaged_drift(model, float(x))) for x in xs]

    print(f"{'x':>10}  {'b_bar(x)':>12}  {'2 - x':>10}")
    for x, b in rows:
        closed = 1.0 if x == 0.0 else 2.0 - x
        print(f"{x:>10.4g}  {b:>12.8f}  {closed:>10.6f}")

    probe = discontinuity_probe(model, 0.0, [0.1, 0.03, 0.01, 0.003])
    print(f"\nright limit estimate {probe['right_limit_estimate']:.6f}")
    print(f"value at 0           {probe['value_at_x0']:.6f}")
    print(f"jump                 {probe['gap']:.6f}")

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("x,b_bar\n")
            for x, b in rows:
                fh.write(f"{x!r},{b!r}\n")
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
