"""Command line entry point: ``qnoiselab <subcommand> [options]``.

Exit codes: 0 success, 2 validation failure, 3 cap exceeded,
4 numerical contract violation, 1 anything else.
"""
import argparse
import json
import sys

from . import harness
from .errors import QNoiseLabError
from .harness import ExperimentConfig, ValidationError

SUBCOMMAND_KINDS = {
    "sample": ("boson-exact", "fermion-exact", "fourier"),
    "noise-sweep": ("noise-sweep",),
    "hermite-check": ("hermite-check",),
    "circuit": ("circuit-run",),
    "noisy-cat": ("noisy-cat",),
    "smooth": ("smoothing",),
    "fluctuation": ("fluctuation",),
}


def _model_from_args(args):
    return {"name": args.model, "rate": args.rate, "correlation": args.correlation}


def _circuit_from_args(args):
    if args.circuit:
        return args.circuit
    return {"random": {"n": args.random_n, "depth": args.depth}}


def build_parser():
    parser = argparse.ArgumentParser(prog="qnoiselab", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="64-bit unsigned master seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--config", default=None, help="experiment config JSON")
    parser.add_argument("--mc", type=int, default=None, help="Monte Carlo sample count")
    parser.add_argument("--workers", type=int, default=1, help="parallel workers for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="exact boson/fermion/fourier distributions")
    p.add_argument("--kind", choices=["boson", "fermion", "fourier"], default="boson")
    p.add_argument("--matrix", default="worked-example", help="matrix JSON file or 'worked-example'")
    p.add_argument("--haar", nargs=2, type=int, metavar=("N", "M"))
    p.add_argument("--gaussian", nargs=2, type=int, metavar=("N", "M"))
    p.add_argument("--function", default="majority", help="majority, parity, dictator or random")
    p.add_argument("--bits", type=int, default=3)
    p.add_argument("--samples", type=int, default=0)

    p = sub.add_parser("noise-sweep", help="ideal vs noisy boson correlation sweep")
    p.add_argument("--n", nargs="+", type=int, default=[2, 3, 4])
    p.add_argument("--eps", nargs="+", type=float, default=[0.05, 0.1, 0.2, 0.3, 0.4])
    p.add_argument("--scaling", choices=["fixed", "inverse_n"], default="fixed")
    p.add_argument("--ensemble", choices=["gaussian", "haar"], default="gaussian")
    p.add_argument("--m-rule", default="n2+n")
    p.add_argument("--inputs", type=int, default=20)
    p.add_argument("--renormalize", action="store_true")

    p = sub.add_parser("hermite-check", help="Hermite damping under Gaussian noise")
    p.add_argument("--degrees", nargs="+", type=int, default=[1, 2, 3, 4])
    p.add_argument("--eps", type=float, default=0.36)

    for name, text in (("circuit", "noisy circuit trajectories"), ("smooth", "time-smoothed noise")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--circuit", default=None, help="circuit JSON file")
        p.add_argument("--random-n", type=int, default=2 if name == "smooth" else 4)
        p.add_argument("--depth", type=int, default=6 if name == "smooth" else 20)
        p.add_argument("--rate", type=float, default=0.05 if name == "smooth" else 0.01)
        if name == "circuit":
            p.add_argument("--model", default="independent",
                           choices=["none", "independent", "pairwise", "all-or-none"])
            p.add_argument("--correlation", type=float, default=0.0)
            p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("noisy-cat", help="noisy-cat inequality for a two-qubit spec")
    p.add_argument("--state", default="cat", help="cat, product, ghz or a theta value")
    p.add_argument("--spec", nargs=4, type=float, default=[0.9, 0.04, 0.04, 0.02],
                   metavar=("P00", "P01", "P10", "P11"))
    p.add_argument("--alpha", type=float, default=1.5)

    p = sub.add_parser("fluctuation", help="std of corrupted count versus N")
    p.add_argument("--model", default="independent", choices=["independent", "pairwise", "all-or-none"])
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--correlation", type=float, default=0.0)
    p.add_argument("--sizes", nargs="+", type=int, default=[8, 16, 32, 64])
    p.add_argument("--trials", type=int, default=10000)

    sub.add_parser("validate", help="validate --config without running")
    p = sub.add_parser("plot-data", help="re-emit long-form plot CSV for a result directory")
    p.add_argument("result_dir")
    return parser


def config_from_args(args):
    cmd = args.command
    if cmd == "sample":
        if args.kind == "fourier":
            kind = "fourier"
            params = {"function": args.function, "n": args.bits}
        else:
            kind = f"{args.kind}-exact"
            if args.haar:
                matrix = {"ensemble": "haar", "n": args.haar[0], "m": args.haar[1]}
            elif args.gaussian:
                matrix = {"ensemble": "gaussian", "n": args.gaussian[0], "m": args.gaussian[1]}
            else:
                matrix = args.matrix
            params = {"matrix": matrix}
        params["samples"] = args.samples
    elif cmd == "noise-sweep":
        kind = "noise-sweep"
        params = {"n_list": args.n, "eps_list": args.eps, "epsilon_scaling": args.scaling,
                  "ensemble": args.ensemble, "m_rule": args.m_rule, "inputs": args.inputs,
                  "renormalize": args.renormalize}
    elif cmd == "hermite-check":
        kind = "hermite-check"
        params = {"degrees": args.degrees, "epsilon": args.eps}
    elif cmd == "circuit":
        kind = "circuit-run"
        params = {"circuit": _circuit_from_args(args), "model": _model_from_args(args), "trials": args.trials}
    elif cmd == "smooth":
        kind = "smoothing"
        params = {"circuit": _circuit_from_args(args), "rate": args.rate}
    elif cmd == "noisy-cat":
        kind = "noisy-cat"
        state = args.state
        if state not in ("cat", "product", "ghz"):
            state = {"theta": float(state)}
        params = {"state": state, "spec": args.spec, "alpha": args.alpha}
    elif cmd == "fluctuation":
        kind = "fluctuation"
        params = {"models": [{"name": args.model, "rate": args.rate, "correlation": args.correlation}],
                  "sizes": args.sizes, "trials": args.trials}
    else:
        raise ValueError(cmd)
    return ExperimentConfig(kind=kind, parameters=params)


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.mc is not None and cfg.kind in ("noise-sweep", "hermite-check"):
        cfg.parameters["mc"] = args.mc
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot-data":
            path = harness.emit_plot_data(harness.load_result(args.result_dir))
            print(path)
            return 0
        if args.config:
            cfg = ExperimentConfig.load(args.config)
            allowed = SUBCOMMAND_KINDS.get(args.command)
            if allowed and cfg.kind not in allowed:
                print(f"error: config kind {cfg.kind!r} does not match subcommand {args.command!r}",
                      file=sys.stderr)
                return 2
        elif args.command == "validate":
            print("error: validate needs --config", file=sys.stderr)
            return 2
        else:
            cfg = config_from_args(args)
        _apply_overrides(cfg, args)
        if args.command == "validate":
            violations = harness.validate(cfg)
            for v in violations:
                print(f"violation: {v}", file=sys.stderr)
            if not violations:
                print("ok")
                return 0
            return 3 if any(v.cap for v in violations) else 2
        result = harness.run(cfg, workers=args.workers)
    except ValidationError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return exc.exit_code
    except QNoiseLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps({"output_dir": str(result.output_dir), "files": sorted(result.files)}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
