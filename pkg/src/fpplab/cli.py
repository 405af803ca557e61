"""fpp-lab command line: one subcommand per experiment, plus plotdata."""

from __future__ import annotations

import argparse
import os
import sys

from .errors import AssumptionViolation, ConfigurationError, DomainError, FormatError, ResourceRefusal
from .parallel import WORKERS_ENV, default_workers
from .runner import EXPERIMENTS, RunConfig, emit_plotdata, read_config_file, read_manifest_config, run

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_RESOURCE = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_IOERR = 74

# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "dist": "dist", "d": "d", "n": "n_grid", "xi": "xi", "theta": "theta", "replicas": "replicas",
    "seed": "master_seed", "delta": "delta", "M": "M", "out": "out", "workers": "workers", "pc": "pc",
    "kappa": "kappa", "half_width": "half_width", "u": "u_grid", "q": "q", "horizon": "horizon",
    "radius": "radius", "l": "l", "mu_ref": "mu_ref", "alpha": "alpha",
}
_CONFIG_ALIASES = {"n": "n_grid", "seed": "master_seed", "u": "u_grid"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for assumption violations here
    def error(self, message):
        raise UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--manifest", help="re-run the configuration stored in a manifest.json")
    p.add_argument("--dist", help="weight law literal, e.g. uniform:0.5:1.5 or atoms:1:0.8,2:0.2")
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--n", help="comma-separated scales")
    p.add_argument("--xi", help="comma-separated direction (normalised)")
    p.add_argument("--theta", help="comma-separated angles in radians (variance-scan)")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--delta", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--out", help="output directory (default fpp-runs/<experiment>)")
    p.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    p.add_argument("--pc", type=float, help="bond p_c override")
    p.add_argument("--kappa", type=float)
    p.add_argument("--half-width", dest="half_width", type=float, help="override the D_n half-width")
    p.add_argument("--u", help="comma-separated deviation levels (concentration)")
    p.add_argument("--q", help="comma-separated open probabilities (oriented-speed)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--radius", type=int, help="box radius (pc)")
    p.add_argument("--l", type=int, help="second Lambda scale multiplier")
    p.add_argument("--mu-ref", dest="mu_ref", type=float, help="reference time constant")
    p.add_argument("--alpha", type=float, help="moment order for (A2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpp-lab", description="First passage percolation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        _add_run_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    pd = sub.add_parser("plotdata", help="derive gnuplot files from a run directory")
    pd.add_argument("run_dir")
    return parser


def resolve_config(experiment: str, args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.manifest:
        values.update(read_manifest_config(args.manifest))
    if args.config:
        for k, v in read_config_file(args.config).items():
            values[_CONFIG_ALIASES.get(k, k)] = v
    for flag, fld in _FLAG_FIELDS.items():
        v = getattr(args, flag)
        if v is not None:
            values[fld] = v
    values.pop("experiment", None)
    values.setdefault("workers", default_workers())
    known = set(RunConfig.__dataclass_fields__) - {"_converters"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    return RunConfig(experiment=experiment, **values)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"fpp-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "plotdata":
            for path in emit_plotdata(args.run_dir):
                print(path)
            return EXIT_OK
        cfg = resolve_config(args.command, args)
        result, out = run(cfg)
    except AssumptionViolation as exc:
        print(f"fpp-lab: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ResourceRefusal as exc:
        print(f"fpp-lab: resource refusal: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except FormatError as exc:
        print(f"fpp-lab: format error: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except (ConfigurationError, DomainError) as exc:
        print(f"fpp-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fpp-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IOERR
    for line in result.lines:
        print(line)
    print(f"wrote {os.path.join(out, 'results.csv')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
