"""``cviqp`` command line: amplitudes, probabilities, samples, contour grids and experiments.

Settings are resolved as command-line flags, then ``CVIQP_BUDGET`` (grid-point
cap only), then the ``--config`` JSON file, then built-in defaults. Exit codes:
0 success, 2 invalid input, 3 budget exceeded, 4 failed numerical self-check.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import _io
from .circuit import CircuitSpec, GridSpec, OutcomeGrid, default_grid
from .exceptions import BudgetExceededError, NumericalCheckError
from .hardness import (
    FoolingInstance,
    anticoncentration_report,
    fooling_demo,
    fooling_node_bound,
    hiding_check,
    markov_check,
    oracles_from_json,
    verify_sharp_p_sum,
)
from .integrator import (
    METHODS,
    binned_amplitude,
    contour_axis,
    exact_probability_sinc_1d,
    gaussian_closed_form,
    integrand_real_part,
    riemann_amplitude,
    squeezed_amplitude_grid,
    squeezed_amplitude_mc,
)
from .sampler import distribution, perturb, sample

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_NUMERICAL = 0, 2, 3, 4
BUDGET_ENV = "CVIQP_BUDGET"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing helpers
# ---------------------------------------------------------------------------


def _vector(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from err


def _sigma_list(text: str) -> list[float]:
    out = []
    for x in str(text).split(","):
        x = x.strip().lower()
        if x:
            out.append(math.inf if x in ("inf", "infinity") else float(x))
    return out


def _load_json(source: str | dict, what: str) -> Any:
    """Inline JSON, a path to a JSON file, or an already-parsed object."""
    if isinstance(source, (dict, list)):
        return source
    text = str(source).strip()
    if not text.startswith(("{", "[")):
        try:
            text = Path(text).read_text()
        except OSError as err:
            raise UsageError(f"cannot read {what} file {source!r}: {err.strerror}") from err
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise UsageError(f"malformed {what} JSON: {err}") from err


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--L", type=float, help="integration half-width (defaults to a heuristic)")
    p.add_argument("--k", type=int, help="bits per mode; 2**k nodes per mode")
    p.add_argument("--target-truncation", type=float, help="tail target for the default grid")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--budget", type=int, help=f"grid-point cap (env {BUDGET_ENV})")
    p.add_argument("--verbose", "-v", action="store_true", help="log progress to standard error")


def _circuit_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--circuit", help="circuit JSON: a file path or inline JSON text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cviqp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    amp = sub.add_parser("amplitude", help="one outcome amplitude")
    _circuit_flag(amp)
    amp.add_argument("--s", type=_vector, help="outcome vector, e.g. 0.1,-0.2")
    amp.add_argument("--method", choices=[m for m in METHODS if m != "sinc_exact"])
    amp.add_argument("--bins", type=int, help="phase bins N (power of two) for --method binned")
    amp.add_argument("--samples", type=int, help="Monte Carlo sample count")
    amp.add_argument("--seed", type=int, help="random seed (required for squeezed_mc)")
    amp.add_argument("--richardson", action="store_true", default=None, help="estimate eps_b")
    _grid_flags(amp)
    _common_flags(amp)

    prob = sub.add_parser("prob", help="one outcome probability, or the full distribution as CSV")
    _circuit_flag(prob)
    prob.add_argument("--s", type=_vector, help="outcome vector; omit for the whole lattice")
    prob.add_argument("--method", choices=list(METHODS))
    prob.add_argument("--bins", type=int)
    prob.add_argument("--samples", type=int)
    prob.add_argument("--seed", type=int)
    prob.add_argument("--normalize", action="store_true", default=None)
    _grid_flags(prob)
    _common_flags(prob)

    smp = sub.add_parser("sample", help="draw outcomes from the lattice distribution (CSV)")
    _circuit_flag(smp)
    smp.add_argument("--count", type=int, help="number of samples")
    smp.add_argument("--seed", type=int, help="random seed (required)")
    _grid_flags(smp)
    _common_flags(smp)

    con = sub.add_parser("contour", help="real part of the integrand on a square grid (CSV per sigma)")
    _circuit_flag(con)
    con.add_argument("--sigma", type=_sigma_list, help="comma-separated widths; 'inf' allowed")
    con.add_argument("--resolution", "-R", type=int, help="points per axis (default 400)")
    con.add_argument("--L", type=float, help="plot half-width (default 4)")
    con.add_argument("--T", type=float, help="rescale the phase, q -> T q")
    con.add_argument("--output-dir", help="directory for the CSV files (default: current)")
    con.add_argument("--prefix", help="file name prefix (default 'contour')")
    _common_flags(con)

    exp = sub.add_parser("experiment", help="hardness experiments (JSON reports)")
    exp.add_argument("kind", help="sharp-p | fooling | anticonc | hide-check | markov")
    _circuit_flag(exp)
    exp.add_argument("--oracles", help="sharp-p: oracle truth tables (file or inline JSON)")
    exp.add_argument("--bins", type=int, help="sharp-p: expected number of oracles N")
    exp.add_argument("--n", type=int, help="fooling: dimension")
    exp.add_argument("--sigma", type=float, help="fooling: Gaussian width")
    exp.add_argument("--delta", type=float, help="fooling: node radius parameter; markov: failure rate")
    exp.add_argument("--nodes", type=int, help="fooling: number of random rule nodes (default 16)")
    exp.add_argument("--eps", type=float, help="fooling/markov: additive error")
    exp.add_argument("--eps-b", type=float, help="fooling: discretisation error")
    exp.add_argument("--alpha", type=float, help="anticonc: Paley-Zygmund threshold (default 0.5)")
    exp.add_argument("--trials", type=int, help="anticonc: number of random shifts")
    exp.add_argument("--seed", type=int)
    exp.add_argument("--r", type=_vector, help="hide-check: displacement")
    exp.add_argument("--s", type=_vector, help="hide-check: outcome")
    _grid_flags(exp)
    _common_flags(exp)
    return parser


def _resolve(args: argparse.Namespace, env: dict) -> argparse.Namespace:
    """Fill unset flags: ``CVIQP_BUDGET`` for the budget, then ``--config``."""
    if args.budget is None and env.get(BUDGET_ENV):
        try:
            args.budget = int(env[BUDGET_ENV])
        except ValueError as err:
            raise UsageError(f"{BUDGET_ENV} must be an integer") from err
    if args.config:
        cfg = _load_json(args.config, "config")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        for key, value in cfg.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise UsageError(f"unknown config key {key!r}")
            if getattr(args, attr) is None:
                if attr in ("s", "r") and isinstance(value, str):
                    value = _vector(value)
                if attr == "sigma" and args.command == "contour":
                    value = _sigma_list(value if isinstance(value, str) else ",".join(map(str, value)))
                setattr(args, attr, value)
    return args


def _circuit(args) -> CircuitSpec:
    if args.circuit is None:
        raise UsageError("--circuit is required")
    data = _load_json(args.circuit, "circuit")
    if not isinstance(data, dict):
        raise UsageError("circuit JSON must be an object")
    return CircuitSpec.from_json(data)


def _grid(args, c: CircuitSpec) -> GridSpec:
    if args.L is not None and args.k is not None:
        return GridSpec(args.L, args.k)
    t = args.target_truncation if args.target_truncation is not None else 1e-6
    g = default_grid(c, t)
    if args.L is not None:
        k = max(1, math.ceil(math.log2(2.0 * args.L / g.delta_q) - 1e-12))
        return GridSpec(args.L, k)
    if args.k is not None:
        return GridSpec(g.L, args.k)
    return g


def _outcome(args, c: CircuitSpec) -> np.ndarray:
    s = np.zeros(c.n_modes) if args.s is None else np.asarray(args.s, dtype=float)
    if s.size != c.n_modes:
        raise UsageError(f"--s has {s.size} entries, circuit has {c.n_modes} modes")
    return s


def _threads(args) -> int:
    return 1 if args.threads is None else max(1, int(args.threads))


def _bins_to_l(N: int) -> int:
    if N is None or N < 2 or N & (N - 1):
        raise UsageError("--bins must be a power of two >= 2")
    return N.bit_length() - 1


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _amplitude_estimate(args, c: CircuitSpec, s: np.ndarray):
    method = args.method or ("squeezed_grid" if c.is_squeezed else "riemann")
    threads = _threads(args)
    if method == "gaussian_closed":
        value = gaussian_closed_form(c.polynomial, s, c.sigma, c.delta_p)
        return {"re": value.real, "im": value.imag, "method": method}
    if method == "squeezed_mc":
        if args.seed is None:
            raise UsageError("--method squeezed_mc requires --seed")
        samples = args.samples if args.samples is not None else 100_000
        return squeezed_amplitude_mc(c, s, samples, args.seed, threads=threads).to_json()
    g = _grid(args, c)
    rich = bool(getattr(args, "richardson", None))
    if method == "riemann":
        est = riemann_amplitude(c.phase, s, g, n_modes=c.n_modes, budget=args.budget, richardson=rich, threads=threads)
        return est.to_json()
    if method == "binned":
        est, report = binned_amplitude(
            c.phase, s, g, _bins_to_l(args.bins), n_modes=c.n_modes, budget=args.budget, threads=threads
        )
        return {**est.to_json(), "bins": report.to_json()}
    if method == "squeezed_grid":
        return squeezed_amplitude_grid(c, s, g, budget=args.budget, richardson=rich, threads=threads).to_json()
    raise UsageError(f"method {method!r} does not produce an amplitude")


def cmd_amplitude(args) -> str:
    c = _circuit(args)
    return _io.dumps(_amplitude_estimate(args, c, _outcome(args, c)))


def cmd_prob(args) -> str:
    c = _circuit(args)
    if args.s is None:
        if args.method not in (None, "squeezed_grid"):
            raise UsageError("the full distribution is computed with squeezed_grid only")
        d = distribution(c, _grid(args, c), normalize=bool(args.normalize), budget=args.budget, threads=_threads(args))
        return d.to_csv()
    s = _outcome(args, c)
    if args.method == "sinc_exact":
        g = _grid(args, c) if (args.L is not None or args.k is not None) else None
        budget = args.budget if args.budget is not None else 1 << 14
        p = exact_probability_sinc_1d(c, float(s[0]), g, budget=budget)
        return _io.dumps({"s": s.tolist(), "probability": p, "method": "sinc_exact"})
    amp = _amplitude_estimate(args, c, s)
    p = amp["re"] ** 2 + amp["im"] ** 2
    return _io.dumps({"s": s.tolist(), "probability": p, "amplitude": amp})


def cmd_sample(args) -> str:
    if args.seed is None:
        raise UsageError("sample requires --seed")
    if args.count is None:
        raise UsageError("sample requires --count")
    c = _circuit(args)
    d = distribution(c, _grid(args, c), normalize=True, budget=args.budget, threads=_threads(args))
    draws = sample(d, args.count, args.seed)
    return _io.csv_text([f"s_{k + 1}" for k in range(c.n_modes)], draws)


def _sigma_label(sigma: float) -> str:
    return "inf" if math.isinf(sigma) else format(sigma, "g")


def contour_csv(p, sigma: float, L: float, resolution: int) -> str:
    axis = contour_axis(L, resolution)
    vals = integrand_real_part(p, sigma, axis)
    header = ["q2\\q1"] + [_io.format_float(x) for x in axis]
    rows = (np.concatenate([[q2], row]) for q2, row in zip(axis, vals))
    return _io.csv_text(header, rows)


def cmd_contour(args) -> str:
    c = _circuit(args)
    if c.n_modes != 2:
        raise UsageError("contour needs a two-mode circuit")
    p = c.polynomial
    if args.T is not None:
        p = p.rescale(args.T)
    sigmas = args.sigma if args.sigma is not None else [c.sigma]
    L = args.L if args.L is not None else 4.0
    R = args.resolution if args.resolution is not None else 400
    outdir = Path(args.output_dir or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or "contour"
    written = []
    for sigma in sigmas:
        path = outdir / f"{prefix}_sigma_{_sigma_label(sigma)}.csv"
        path.write_text(contour_csv(p, sigma, L, R))
        written.append({"sigma": sigma if math.isfinite(sigma) else "inf", "path": str(path)})
    return _io.dumps({"resolution": R, "L": L, "T": args.T, "files": written})


def _experiment_sharp_p(args) -> dict:
    if args.oracles is None:
        raise UsageError("sharp-p requires --oracles")
    oracles = oracles_from_json(_load_json(args.oracles, "oracles"))
    if args.bins is not None and args.bins != len(oracles):
        raise UsageError(f"--bins {args.bins} disagrees with the {len(oracles)} oracles supplied")
    if args.k is None:
        raise UsageError("sharp-p requires --k")
    g = GridSpec(args.L if args.L is not None else math.pi, args.k)
    return verify_sharp_p_sum(oracles, g).to_json()


def _experiment_fooling(args) -> dict:
    for name in ("n", "sigma", "delta"):
        if getattr(args, name) is None:
            raise UsageError(f"fooling requires --{name}")
    n, sigma, delta = args.n, args.sigma, args.delta
    eps = args.eps if args.eps is not None else 0.0
    eps_b = args.eps_b if args.eps_b is not None else 0.0
    bound = fooling_node_bound(n, sigma, delta, eps, eps_b)
    L = args.L if args.L is not None else 4.0 * sigma
    k = args.k if args.k is not None else 8
    inst = FoolingInstance.random(n, 16 if args.nodes is None else args.nodes, L, delta, 0 if args.seed is None else args.seed)
    report = fooling_demo(inst, sigma, GridSpec(L, k), budget=args.budget, threads=_threads(args)).to_json()
    report["node_bound"] = bound
    report["eps"] = eps
    report["eps_b"] = eps_b
    report["delta_below_sigma_over_sqrt_e"] = delta < sigma / math.sqrt(math.e)
    return report


def _experiment_anticonc(args) -> dict:
    c = _circuit(args)
    g = _grid(args, c)
    trials = args.trials if args.trials is not None else OutcomeGrid(g.L, c.delta_p).n_outcomes(c.n_modes)
    alpha = args.alpha if args.alpha is not None else 0.5
    seed = 0 if args.seed is None else args.seed
    return anticoncentration_report(c, g, alpha, trials, seed, threads=_threads(args)).to_json()


def _experiment_hide(args) -> dict:
    c = _circuit(args)
    if args.r is None:
        raise UsageError("hide-check requires --r")
    r = np.asarray(args.r, dtype=float)
    if r.size != c.n_modes:
        raise UsageError(f"--r has {r.size} entries, circuit has {c.n_modes} modes")
    g = _grid(args, c)
    return hiding_check(c, r, _outcome(args, c), g, threads=_threads(args)).to_json()


def _experiment_markov(args) -> dict:
    c = _circuit(args)
    g = _grid(args, c)
    eps = args.eps if args.eps is not None else 1.0 / 64
    delta = args.delta if args.delta is not None else 1.0 / 8
    seed = 0 if args.seed is None else args.seed
    exact = distribution(c, g, normalize=True, budget=args.budget, threads=_threads(args))
    approx = perturb(exact, eps, seed)
    return markov_check(exact, approx, eps, delta).to_json()


EXPERIMENTS = {
    "sharp-p": _experiment_sharp_p,
    "fooling": _experiment_fooling,
    "anticonc": _experiment_anticonc,
    "hide-check": _experiment_hide,
    "markov": _experiment_markov,
}


def cmd_experiment(args) -> str:
    try:
        run = EXPERIMENTS[args.kind]
    except KeyError:
        raise UsageError(f"unknown experiment {args.kind!r}; choose from {', '.join(EXPERIMENTS)}") from None
    report = run(args)
    return _io.dumps({"experiment": args.kind, **report})


COMMANDS = {
    "amplitude": cmd_amplitude,
    "prob": cmd_prob,
    "sample": cmd_sample,
    "contour": cmd_contour,
    "experiment": cmd_experiment,
}


def run(argv: Sequence[str] | None = None, env: dict | None = None) -> int:
    """Parse, execute and write output; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _resolve(args, dict(os.environ) if env is None else env)
        text = COMMANDS[args.command](args)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
    except BudgetExceededError as err:
        print(f"cviqp: budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalCheckError as err:
        print(f"cviqp: numerical check failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError, OSError) as err:
        print(f"cviqp: error: {err}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
