"""
Command-line front end.

Verbs: ``observables``, ``calibrate``, ``verify``, ``roll``, ``simulate``.
Every run writes ``manifest.json`` into the output directory; passing it back
with ``--manifest`` re-runs the same command after checking input hashes.

Exit codes: 0 ok, 2 input error, 3 configuration error, 4 numerical failure,
5 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .configfile import ConfigError, load_sim_config
from .fitting import FitError, KernelFit, fit_kernel, save_fits, weights_from_se
from .kernel import invert_observables, save_kernels, save_qarch, to_qarch
from .marketdata import DataError, index_returns, load_index, load_prices, save_returns, to_returns
from .observables import estimate_observables, normalized, save_observables
from .plotting import Series, write_chart
from .rolling import (
    KL_PHASES,
    KV_PHASES,
    RollingConfig,
    attach_index_volatility,
    index_volatility,
    market_average,
    rolling_indicators,
    save_indicators,
)
from .simulator import PerturbativeRegimeError, simulate
from .verify import verify

log = logging.getLogger("volfeedback")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4, 5


class CommandError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Everything needed to re-run a command."""

    command: str
    argv: list[str]
    inputs: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    tool_version: str = __version__
    seed: int | None = None

    def write(self, out_dir: Path) -> None:
        data = {
            "command": self.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "config": self.config,
            "tool_version": self.tool_version,
            "seed": self.seed,
        }
        (out_dir / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _inputs(paths) -> list[dict]:
    return [{"path": str(p), "sha256": _sha256(p)} for p in paths]


def _load_returns(args, path):
    prices = load_prices(path, date_column=args.date_column, close_column=args.close_column)
    return to_returns(prices, cutoff=args.cutoff)


def _map(args, fn, items):
    if args.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _check_tau_max(tau_max, returns):
    if tau_max < 1 or tau_max >= len(returns):
        raise CommandError(f"--tau-max {tau_max} must lie in [1, {len(returns) - 1}] for {returns.symbol}", EXIT_CONFIG)


def cmd_observables(args, manifest: RunManifest) -> int:
    out = args.out_dir
    series = _map(args, lambda p: _load_returns(args, p), args.inputs)
    for r in series:
        _check_tau_max(args.tau_max, r)
    sets = _map(args, lambda r: estimate_observables(r, args.tau_max), series)
    chart = []
    for r, obs in zip(series, sets):
        table = normalized(obs) if args.normalize else obs
        save_observables(table, out / f"{r.symbol}_observables.csv")
        norm = normalized(obs)
        chart.append(Series(f"{r.symbol} L+/s^3", norm.lags, norm.l_plus))
        chart.append(Series(f"{r.symbol} L-/s^3", norm.lags, norm.l_minus, dashed=True))
    write_chart(out / "observables.svg", chart, title="Conditional correlations L+-(tau)/sigma^3", xlabel="lag tau (days)", ylabel="L/sigma^3", hlines=[(0.0, "0")])
    manifest.config = {"tau_max": args.tau_max, "cutoff": args.cutoff, "normalize": args.normalize}
    return EXIT_OK


def _fit_report(symbol, kernels, fits: dict[str, KernelFit]) -> str:
    lines = [f"# kernel fits for {symbol}", f"sigma = {kernels.sigma:.8g}", f"tau_max = {kernels.tau_max}",
             f"perturbative flag = {'outside (max |K| > 0.6)' if kernels.outside_perturbative else 'ok'}", ""]
    for name, fit in fits.items():
        lines.append(f"[{name}] form = {fit.form}")
        for p, v in fit.params.items():
            lines.append(f"  {p} = {v:.6g} +/- {fit.ci95[p]:.3g}")
        lines.append(f"  residual_rms = {fit.residual_rms:.4g}; converged = {fit.converged}; iterations = {fit.iterations}")
        if fit.power_law_regime:
            lines.append("  note: T exceeds the largest lag (power-law regime)")
        lines.append("")
    return "\n".join(lines)


def cmd_calibrate(args, manifest: RunManifest) -> int:
    out = args.out_dir
    forms = ("tpl", "2exp") if args.fit == "both" else (args.fit,)
    failed = []
    for path in args.inputs:
        r = _load_returns(args, path)
        _check_tau_max(args.tau_max, r)
        obs = estimate_observables(r, args.tau_max)
        k = invert_observables(obs)
        save_kernels(k, out / f"{r.symbol}_kernels.csv")
        if args.qarch:
            save_qarch(to_qarch(k), out / f"{r.symbol}_qarch.csv")
        fits = {}
        for label, values, se in (("k_plus", k.k_plus, k.se_k_plus), ("k_minus", k.k_minus, k.se_k_minus)):
            w = weights_from_se(se) if args.weights == "se" else None
            for form in forms:
                try:
                    fit = fit_kernel(values, form, weights=w, lags=k.lags)
                except FitError as exc:
                    raise CommandError(f"{r.symbol} {label}: {exc}", EXIT_NUMERICAL) from None
                fits[f"{label}:{form}"] = fit
                if not fit.converged:
                    failed.append(f"{r.symbol} {label} {form}")
        save_fits(fits, out / f"{r.symbol}_fits.csv")
        (out / f"{r.symbol}_fit_report.txt").write_text(_fit_report(r.symbol, k, fits), encoding="utf-8")
        chart = [Series("K+ estimate", k.lags, k.k_plus), Series("K- estimate", k.lags, k.k_minus)]
        for name, fit in fits.items():
            chart.append(Series(f"{name} fit", k.lags, fit(k.lags), dashed=True))
        write_chart(out / f"{r.symbol}_kernels.svg", chart, title=f"Feedback kernels K+-(tau), {r.symbol}", xlabel="lag tau (days)", ylabel="K", hlines=[(0.0, "0")])
    manifest.config = {"tau_max": args.tau_max, "cutoff": args.cutoff, "fit": args.fit, "weights": args.weights, "qarch": args.qarch}
    if failed:
        raise CommandError("fit did not converge: " + ", ".join(failed), EXIT_NUMERICAL)
    return EXIT_OK


def cmd_verify(args, manifest: RunManifest) -> int:
    config, resolved = load_sim_config(args.config, seed=args.seed)
    replicas = args.replicas if args.replicas is not None else int(resolved.get("replicas", 1))
    tau_max = args.tau_max or config.tau_max
    if tau_max >= config.length:
        raise CommandError("tau_max must be smaller than the simulated length", EXIT_CONFIG)
    report = verify(config, tau_max=tau_max, replicas=replicas, threads=args.threads)
    text = report.text()
    (args.out_dir / "verify_report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    manifest.config = {**resolved, "replicas": replicas, "tau_max_check": tau_max}
    manifest.seed = config.seed
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_roll(args, manifest: RunManifest) -> int:
    out = args.out_dir
    try:
        config = RollingConfig(window=args.window, lag_average=args.lag_avg, step=args.step)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from None
    series = _map(args, lambda p: _load_returns(args, p), args.inputs)
    indicators = _map(args, lambda r: rolling_indicators(r, config), series)
    avg = market_average(indicators)
    if args.index:
        idx = index_returns(load_index(args.index, date_column=args.date_column, value_column=args.close_column))
        dates, sigma_r = index_volatility(idx, config)
        avg = attach_index_volatility(avg, dates, sigma_r)
    save_indicators(avg, out / "indicators.csv")
    thin = max(1, args.thin)
    x = np.arange(len(avg))[::thin]
    xlabel = "evaluation index" if not avg.dates or not hasattr(avg.dates[0], "year") else "evaluation (trading days since first window)"
    write_chart(out / "roll_k_v.svg", [Series("K_V bar", x, avg.k_bar_v[::thin])], title="Lag-averaged clustering feedback K_V bar(t)",
                xlabel=xlabel, ylabel="K_V bar", hlines=[(v, f"{v:g}") for v in KV_PHASES])
    write_chart(out / "roll_k_l.svg", [Series("K_L bar", x, avg.k_bar_l[::thin])], title="Lag-averaged leverage feedback K_L bar(t)",
                xlabel=xlabel, ylabel="K_L bar", hlines=[(v, f"{v:g}") for v in KL_PHASES])
    write_chart(out / "roll_l_bar.svg", [Series("L+ bar", x, avg.l_bar_plus[::thin]), Series("L- bar", x, avg.l_bar_minus[::thin])],
                title="Lag-averaged L+-(t)", xlabel=xlabel, ylabel="L bar", hlines=[(0.0, "0")])
    if args.index:
        write_chart(out / "roll_sigma_r.svg", [Series("sigma_R", x, avg.sigma_r[::thin])], title="Index volatility sigma_R(t)", xlabel=xlabel, ylabel="sigma_R")
    manifest.config = {"window": args.window, "lag_avg": args.lag_avg, "step": args.step, "cutoff": args.cutoff, "thin": args.thin}
    return EXIT_OK


def cmd_simulate(args, manifest: RunManifest) -> int:
    config, resolved = load_sim_config(args.config, seed=args.seed)
    sim = simulate(config)
    target = Path(args.out) if args.out else args.out_dir / "simulated_returns.csv"
    if not target.is_absolute() and args.out:
        target = args.out_dir / target
    save_returns(sim, target)
    log.info("floor hits: %d of %d steps", sim.floor_hits, sim.steps)
    manifest.config = resolved
    manifest.seed = config.seed
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volfeedback", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for inputs and replicas")
    parser.add_argument("--seed", type=int, default=None, help="override the simulation seed")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs")
    parser.add_argument("--manifest", type=Path, default=None, help="re-run the command recorded in a manifest")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    def data_flags(p):
        p.add_argument("--cutoff", type=float, default=0.15, help="jump filter threshold (default 0.15)")
        p.add_argument("--date-column", default="date")
        p.add_argument("--close-column", default="close")

    p = sub.add_parser("observables", help="estimate L+-, L, V from price files")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--tau-max", type=int, default=800)
    p.add_argument("--normalize", action="store_true", help="write L/sigma^3 and V/sigma^4")
    data_flags(p)

    p = sub.add_parser("calibrate", help="invert observables to kernels and fit parametric forms")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--tau-max", type=int, default=800)
    p.add_argument("--fit", choices=("tpl", "2exp", "both"), default="both")
    p.add_argument("--weights", choices=("se", "uniform"), default="se")
    p.add_argument("--qarch", action="store_true", help="also write the dense QARCH quadratic kernel")
    data_flags(p)

    p = sub.add_parser("verify", help="simulate with known kernels and check every leading-order prediction")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--tau-max", type=int, default=None, help="estimation lags (default: kernel length)")

    p = sub.add_parser("roll", help="rolling-window market indicators")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--index", type=Path, default=None, help="index CSV with a divisor column")
    p.add_argument("--window", type=int, default=400)
    p.add_argument("--lag-avg", type=int, default=10)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--thin", type=int, default=1, help="plot every n-th evaluation")
    data_flags(p)

    p = sub.add_parser("simulate", help="write a synthetic return series")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    return parser


COMMANDS = {
    "observables": cmd_observables,
    "calibrate": cmd_calibrate,
    "verify": cmd_verify,
    "roll": cmd_roll,
    "simulate": cmd_simulate,
}


def _replay_argv(path: Path) -> list[str]:
    data = json.loads(path.read_text(encoding="utf-8"))
    for item in data.get("inputs", []):
        p = Path(item["path"])
        if not p.exists():
            raise CommandError(f"manifest input {p} is missing", EXIT_INPUT)
        if _sha256(p) != item["sha256"]:
            raise CommandError(f"manifest input {p} changed since the recorded run", EXIT_INPUT)
    return list(data["argv"])


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.manifest is not None:
            replay = _replay_argv(args.manifest)
            out_dir = args.out_dir
            args = parser.parse_args(replay)
            if out_dir != Path("."):
                args.out_dir = out_dir
            argv = replay
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        if args.threads < 1:
            raise CommandError("--threads must be at least 1", EXIT_CONFIG)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(command=args.command, argv=argv, seed=args.seed)
        paths = list(getattr(args, "inputs", []) or [])
        for extra in ("index", "config"):
            if getattr(args, extra, None):
                paths.append(getattr(args, extra))
        for p in paths:
            if not Path(p).exists():
                raise CommandError(f"input file {p} not found", EXIT_INPUT)
        manifest.inputs = _inputs(paths)
        code = COMMANDS[args.command](args, manifest)
        manifest.write(args.out_dir)
        return code
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DataError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PerturbativeRegimeError, FitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
