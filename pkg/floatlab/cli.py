"""
Command line interface.

    floatlab run <config> [--seed N] [--replicates N] [--out PATH] [--format csv|svg|both]
                          [--flavor busemann|holmes-thompson] [--workers N] [--verbose]
    floatlab list-bodies
    floatlab selftest

Exit codes: 0 when the computation completed (whatever the deviation from the
prediction), 1 on a computation error or a failed self test, 2 on a bad or
missing config.
"""

import argparse
import logging
import math
import sys
from typing import Callable, List, Optional, Tuple

from floatlab.errors import ConfigError, ExperimentError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _check_disk_support() -> Tuple[float, float]:
    import numpy as np

    from floatlab.bodies import parse_body

    disk = parse_body("disk r=2")
    return float(disk.support(np.array([0.6, 0.8]))), 2.0


def _check_cap_area() -> Tuple[float, float]:
    from floatlab.spaces import ModelBody, model_measure

    return model_measure(ModelBody.cap(0.8)).value, 2 * math.pi * (1 - math.cos(0.8))


def _check_alpha() -> Tuple[float, float]:
    from floatlab.numerics import alpha_n

    return alpha_n(2), 0.5 * 3 ** (2 / 3) / 2 ** (2 / 3)


def _check_beta() -> Tuple[float, float]:
    from scipy.special import gamma

    from floatlab.numerics import beta_n

    return beta_n(2), 2 / 3 * gamma(5 / 3) * (3 / 2) ** (2 / 3)


def _check_hilbert_distance() -> Tuple[float, float]:
    import numpy as np

    from floatlab.bodies import parse_body
    from floatlab.hilbert import hilbert_distance

    return float(hilbert_distance(parse_body("disk"), np.zeros(2), np.array([0.5, 0.0]))), 0.5 * math.log(3)


def _check_busemann_density() -> Tuple[float, float]:
    import numpy as np

    from floatlab.bodies import parse_body
    from floatlab.hilbert import HilbertGeometry

    x = np.array([0.3, -0.4])
    return float(HilbertGeometry(parse_body("disk")).density(x)), (1 - 0.25) ** -1.5


SELFTESTS: List[Tuple[str, Callable[[], Tuple[float, float]], float]] = [
    ("disk support h(u) = r", _check_disk_support, 1e-12),
    ("cap area 2 pi (1 - cos rho)", _check_cap_area, 1e-8),
    ("alpha_2", _check_alpha, 1e-12),
    ("beta_2", _check_beta, 1e-12),
    ("Hilbert distance 0 -> 1/2 in the disk", _check_hilbert_distance, 1e-12),
    ("Busemann density of the disk", _check_busemann_density, 1e-6),
]


def selftest() -> bool:
    """Run the fast oracle checks; True when all pass."""
    failures = 0
    for name, check, rtol in SELFTESTS:
        try:
            value, expected = check()
            ok = abs(value - expected) <= rtol * max(1.0, abs(expected))
        except Exception as e:
            logger.error("%s raised %s: %s", name, type(e).__name__, e)
            value, expected, ok = float("nan"), float("nan"), False
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {value:.12g} (expected {expected:.12g})")
        failures += not ok
    print(f"\n{len(SELFTESTS) - failures}/{len(SELFTESTS)} checks passed")
    return failures == 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floatlab",
        description="Numerical lab for weighted floating bodies, random polytopes and floating areas",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    # Floating body of the unit disk, CSV and plot
    floatlab run configs/disk.ini --format both

    # Same config, new seed and output stem
    floatlab run configs/random-disk.ini --seed 11 --replicates 400 --out results/disk-11

    # Hilbert geometry with the Holmes-Thompson volume, 4 Ray workers
    floatlab run configs/hilbert.ini --flavor holmes-thompson --workers 4

    floatlab list-bodies
    floatlab selftest
        """,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the experiment described by a config file")
    run.add_argument("config", help="Path to the experiment config (INI)")
    run.add_argument("--seed", type=int, help="Override [experiment] seed")
    run.add_argument("--replicates", type=int, help="Override [experiment] replicates")
    run.add_argument("--out", help="Output path stem (writes <out>.csv, <out>.svg, <out>.msgpack)")
    run.add_argument("--format", choices=["csv", "svg", "both"], help="Which artifacts to write")
    run.add_argument("--flavor", choices=["busemann", "holmes-thompson"], help="Hilbert volume flavor")
    run.add_argument("--workers", type=int, help="Number of Ray workers (1 runs in-process)")
    run.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="Debug logging")

    sub.add_parser("list-bodies", help="Print the body descriptions understood by config files")
    sub.add_parser("selftest", help="Run fast oracle checks")
    return parser


def _run(args: argparse.Namespace) -> int:
    from floatlab.config import ExperimentConfig
    from floatlab.distributed import shutdown_ray
    from floatlab.lab import run

    try:
        config = ExperimentConfig.from_file(args.config).with_overrides(
            seed=args.seed, replicates=args.replicates, out=args.out, format=args.format, flavor=args.flavor,
            workers=args.workers)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentError as e:
        print(f"experiment failed in {e.module}: {e.cause}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as e:
        print(f"could not write results: {e}", file=sys.stderr)
        return EXIT_FAILED
    finally:
        shutdown_ray()

    print(f"\n=== {report.experiment} ===")
    for row in report.rows:
        print(f"{report.param_name}={row.param:<10g} estimate={row.estimate:.8g} normalized={row.normalized:.8g}")
    print(report.summary())
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    # Suppress Ray startup chatter
    logging.getLogger("ray").setLevel(logging.WARNING)

    if args.command == "list-bodies":
        from floatlab.bodies import list_bodies

        for usage in list_bodies():
            print(usage)
        return EXIT_OK
    if args.command == "selftest":
        return EXIT_OK if selftest() else EXIT_FAILED
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
