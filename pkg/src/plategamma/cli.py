"""Command line entry point ``plate-gamma``."""
import argparse
import logging
import os
import sys
import time

from . import config as cfgmod
from . import harness


def _parser():
    ap = argparse.ArgumentParser(
        prog='plate-gamma',
        description="Dimension reduction of anisotropic plates: reduced tensors, "
                    "limit solve and eps-convergence studies.")
    ap.add_argument('--version', action='version', version='%(prog)s 0.1.0')
    sub = ap.add_subparsers(dest='command', required=True)
    for name, text in (('run', 'full convergence study'),
                       ('reduce', 'write the reduced model tables only'),
                       ('check', 'run the invariant suite')):
        p = sub.add_parser(name, help=text)
        p.add_argument('config', help='TOML study description')
        p.add_argument('--out', help='output directory (default: [output] dir of the config)')
        p.add_argument('--threads', type=int, default=1, help='concurrent eps solves')
        p.add_argument('--seed', type=int, default=None, help='override the config seed')
        p.add_argument('-v', '--verbose', action='store_true')
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        config = cfgmod.load(args.config, seed=args.seed)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = args.out or config.output.get('dir', 'out')
    start = time.perf_counter()
    try:
        if args.command == 'reduce':
            _, m = harness.reduced_model(config)
            path = os.path.join(outdir, 'reduced_model.csv')
            harness.write(path, harness.reduced_model_csv(m))
            print(f"reduced model at {len(m.sampling.weights)} in-plane points -> {path}")
            print(f"energy constant c = {m.energy_constant:.17g}")
            return 0
        if args.command == 'check':
            checks = harness.invariant_suite(config, args.threads)
            text = harness.summary_text(checks, "plate-gamma invariant suite")
            harness.write(os.path.join(outdir, 'summary.txt'), text)
            print(text, end='')
            return 0 if all(c[1] for c in checks) else 1
        report, study = harness.run_study(config, args.threads)
        report.checks = harness.limit_checks(study) + report.checks
        harness.emit_report(report, outdir)
        harness.write(os.path.join(outdir, 'reduced_model.csv'),
                      harness.reduced_model_csv(study.model))
        print(harness.summary_text(report), end='')
        logging.getLogger(__name__).info("finished in %.1f s", time.perf_counter() - start)
        return 0 if report.passed else 1
    except Exception as exc:  # surfaced with context, non-zero exit
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == '__main__':
    sys.exit(main())
