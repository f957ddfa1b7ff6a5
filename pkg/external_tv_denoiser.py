#!/usr/bin/env python3

"""External denoiser speaking the MULG plane protocol, backed by the in-process TV.

Usage:
    python3 external_tv_denoiser.py INPUT SIGMA OUTPUT [--lambda 0.7] [--iters 200] [--tol 1e-5]

Meant for templates such as:
    --denoiser "ext:python3 external_tv_denoiser.py {input} {sigma} {output}"
"""

import argparse
import logging
import sys
from pathlib import Path

from mulog.container import read_plane, write_plane
from mulog.denoise import TvConfig, tv_denoise
from mulog.exceptions import MulogError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("input", type=Path)
    parser.add_argument("sigma", type=float)
    parser.add_argument("output", type=Path)
    parser.add_argument("--lambda", dest="lambda_scale", type=float, default=0.7)
    parser.add_argument("--iters", type=int, default=200)
    parser.add_argument("--tol", type=float, default=1e-5)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(message)s")
    try:
        plane = read_plane(args.input)
        cfg = TvConfig(lambda_scale=args.lambda_scale, max_iters=args.iters, tol=args.tol)
        write_plane(args.output, tv_denoise(plane, args.sigma, cfg))
    except (MulogError, OSError) as e:
        logging.error(f"{type(e).__name__}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
