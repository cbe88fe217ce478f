#!/usr/bin/env python3
"""Continuous P0 overload plus one bulk P4 object, with and without a P0 watermark."""

import argparse

from catsim.scenarios import starvation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=4.0)
    ap.add_argument("--high0", type=int, nargs="*", default=[8192, 32768, 131072])
    args = ap.parse_args()
    horizon = int(args.seconds * 1e9)
    print(f"{'H_0':>10} {'P4 sent':>14} {'P4 done (s)':>12} {'P0 sent':>10} {'deadlocks':>10}")
    for h in [*args.high0, None]:
        r = starvation(high0=h, duration_ns=horizon)
        done = "-" if r.bulk_completion_ns is None else f"{r.bulk_completion_ns / 1e9:.3f}"
        print(f"{'inf' if h is None else h:>10} {r.bulk_committed:>7}/{r.bulk_bytes:<6} "
              f"{done:>12} {r.urgent_committed:>10} {r.deadlock_resolutions:>10}")


if __name__ == "__main__":
    main()
