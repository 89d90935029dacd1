#!/usr/bin/env python3
"""Randomised check of the local error-expansion identities.

Thin wrapper over the library suite; see `rtrecovery verify` for the CLI
equivalent with pass/fail tolerances.
"""

import argparse

from rtrecovery.verify import run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--aspect-max", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rep = run_suite(samples=args.samples, aspect_max=args.aspect_max, seed=args.seed)
    for name in ("max_edge_expansion", "max_curl_residual", "max_beta_spread",
                 "max_hierarchy", "max_laplacian", "max_div_residual",
                 "max_fit_mismatch"):
        print(f"{name[4:]:20s} {getattr(rep, name):.3e}")
    print(f"worst overall: {rep.worst:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
