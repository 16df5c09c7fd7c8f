"""Command-line entry point: ``entb92 {sweep,optimize,simulate,thresholds}``.

Angles are given and written in degrees. Exit codes: 0 success, 2 usage
error, 3 numeric domain error (for example a threshold that does not exist).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .errors import DomainError, NoViolationError
from .keyrate import Efficiencies, rate_report
from .loss import predict_s_ch, threshold_bob, threshold_by_bisection, threshold_symmetric
from .optimize import (
    best_theta_entb92_trusted,
    crossover_theta_trusted,
    di_threshold_symmetric,
    maximize_rate,
    optimal_phi_for_rate,
    optimal_phi_for_violation,
    rate_surface,
    sdi_threshold_bob,
)
from .records import csv_text, json_text, write_output
from .sim import (
    SimConfig,
    compare,
    empirical_rates,
    estimate,
    projected_rate,
    simulate,
)
from .states import NOISELESS, NoiseParams, ProtocolParams, coincidence_grid, protocol_table

EXIT_USAGE = 2
EXIT_DOMAIN = 3
REFERENCE_NOISE = (0.015, 0.007)


class UsageError(Exception):
    pass


def _deg(x):
    return float(np.degrees(x))


def parse_grid(text: str) -> float:
    """``"0.1deg"`` or ``"0.1"``; the unit suffix is optional."""
    t = text.strip().lower()
    for suffix in ("deg", "°"):
        if t.endswith(suffix):
            t = t[: -len(suffix)]
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid step {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("grid step must be positive")
    return v


def _add_noise(p, default=(0.0, 0.0)):
    p.add_argument("--pc", type=float, default=default[0], help="colored-noise weight")
    p.add_argument("--pw", type=float, default=default[1], help="white-noise weight")


def _add_angles(p):
    p.add_argument("--theta", type=float, required=True, help="entanglement angle (deg)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--phi", type=float, help="Bob angle (deg)")
    g.add_argument("--phi-equals-theta", action="store_true", help="ent-B92 choice phi = theta")
    g.add_argument("--phi-maxviol", action="store_true", help="phi = arctan(sin theta)")


def _add_output(p, default_format):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entb92", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="emit the data behind one figure")
    p.add_argument("--figure", required=True, choices=("1", "3", "4", "5"))
    p.add_argument("--grid", type=parse_grid, help="theta step in degrees (figs 1, 3, 5) or eta step (fig 4)")
    p.add_argument("--n", type=int, default=1_000_000, help="pairs per simulated point (fig 4)")
    p.add_argument("--seed", type=int, default=0)
    _add_noise(p, REFERENCE_NOISE)
    _add_output(p, "csv")

    p = sub.add_parser("optimize", help="headline optimizations and thresholds")
    p.add_argument("--mode", required=True, choices=("di-threshold", "sdi-threshold", "best-theta", "crossover"))
    p.add_argument("--protocol", choices=("generalized", "entb92"), default="generalized")
    _add_noise(p)
    _add_output(p, "json")

    p = sub.add_parser("simulate", help="Monte Carlo run with analytic references")
    _add_angles(p)
    p.add_argument("--eta", type=float, help="symmetric efficiency")
    p.add_argument("--eta-a", type=float)
    p.add_argument("--eta-b", type=float)
    p.add_argument("--n", type=int, default=10_000_000, help="emitted pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-prob", type=float, default=0.05, help="probability of Alice's test basis")
    p.add_argument("--threads", type=int)
    p.add_argument("--counts-csv", help="also write per-basis-pair counts here")
    _add_noise(p)
    _add_output(p, "json")

    p = sub.add_parser("thresholds", help="Bell-violation threshold efficiencies at one point")
    _add_angles(p)
    _add_noise(p)
    _add_output(p, "json")
    return parser


def _noise(args) -> NoiseParams:
    return NoiseParams(args.pc, args.pw)


def _phi(args, theta: float) -> float:
    if args.phi_equals_theta:
        return theta
    if args.phi_maxviol:
        return float(optimal_phi_for_violation(theta))
    if args.phi is None:
        raise UsageError("give --phi, --phi-equals-theta or --phi-maxviol")
    return math.radians(args.phi)


def _efficiencies(args) -> Efficiencies:
    eta_a = args.eta_a if args.eta_a is not None else args.eta
    eta_b = args.eta_b if args.eta_b is not None else args.eta
    return Efficiencies(1.0 if eta_a is None else eta_a, 1.0 if eta_b is None else eta_b)


def _theta_grid(step_deg: float) -> np.ndarray:
    n = int(round(90.0 / step_deg))
    return np.linspace(90.0 / n, 90.0, n) if abs(n * step_deg - 90.0) < 1e-9 else np.arange(step_deg, 90.0 + 1e-12, step_deg)


# sweeps ----------------------------------------------------------------------


def sweep_fig1(step):
    cols = ["theta_deg", "phi_opt_deg", "r_entB92", "r_maxviol", "r_optimized"]
    rows = []
    for d in _theta_grid(step):
        t = math.radians(d)
        p_opt = optimal_phi_for_rate(t)
        rows.append((
            float(d),
            _deg(p_opt),
            rate_surface(t, t, 1.0, 1.0),
            rate_surface(t, optimal_phi_for_violation(t), 1.0, 1.0),
            rate_surface(t, p_opt, 1.0, 1.0),
        ))
    return cols, rows


def sweep_fig3(step, noise):
    cols = ["theta_deg"]
    for rule in ("entB92", "maxviol"):
        cols += [f"s_ch_{rule}_pure", f"s_ch_{rule}_noisy", f"r_{rule}_pure", f"r_{rule}_noisy"]
    thetas = np.radians(_theta_grid(step))
    out = [np.degrees(thetas)]
    for phis in (thetas, optimal_phi_for_violation(thetas)):
        for n in (NOISELESS, noise):
            out.append(predict_s_ch(coincidence_grid(thetas, phis, n), Efficiencies()))
        for n in (NOISELESS, noise):
            out.append(rate_surface(thetas, phis, 1.0, 1.0, n))
    rows = [tuple(float(col[i]) for col in out) for i in range(len(thetas))]
    return cols, rows


def sweep_fig4(step, noise, n_pairs, seed):
    etas = np.round(np.arange(1.0, 0.5 - 1e-12, -step)[::-1], 12)
    cols = ["eta"]
    series = []
    for mode, tag in (("full-di", "fulldi"), ("1sdi", "1sdi")):
        for nz, ntag in ((NOISELESS, "pure"), (noise, "noisy")):
            for protocol, ptag in (("generalized", "generalized"), ("entb92", "entB92")):
                cols.append(f"r_{tag}_{ptag}_{ntag}")
                series.append((mode, nz, protocol))
    cols += ["r_fulldi_simulated", "r_1sdi_simulated"]
    rows = []
    for k, eta in enumerate(etas):
        row = [float(eta)]
        best_noisy = {}
        for mode, nz, protocol in series:
            ea, eb = (eta, eta) if mode == "full-di" else (1.0, eta)
            res = maximize_rate(ea, eb, nz, protocol)
            row.append(res.best_value)
            if nz is noise and protocol == "generalized":
                best_noisy[mode] = res
        for j, mode in enumerate(("full-di", "1sdi")):
            res = best_noisy[mode]
            cfg = SimConfig(ProtocolParams(res.best_theta, res.best_phi), noise, Efficiencies(), n_pairs, seed + 2 * k + j)
            ea, eb = (eta, eta) if mode == "full-di" else (1.0, eta)
            row.append(projected_rate(simulate(cfg), Efficiencies(float(ea), float(eb))))
        rows.append(tuple(row))
    return cols, rows


def sweep_fig5(step, noise):
    cols = ["theta_deg", "phi_deg", "phi_rule", "eta_th_pure", "eta_th_noisy", "eta_th_b_pure", "eta_th_b_noisy"]
    thetas = np.radians(_theta_grid(step))
    rows = []
    for rule, phis in (("entB92", thetas), ("maxviol", optimal_phi_for_violation(thetas))):
        vals = []
        for n in (NOISELESS, noise):
            tab = coincidence_grid(thetas, phis, n)
            vals.append((threshold_symmetric(tab), threshold_bob(tab)))
        for i in range(len(thetas)):
            rows.append((
                _deg(thetas[i]), _deg(phis[i]), rule,
                float(vals[0][0][i]), float(vals[1][0][i]), float(vals[0][1][i]), float(vals[1][1][i]),
            ))
    t, p = math.pi / 2, math.pi / 4
    mes = [coincidence_grid(np.array([t]), np.array([p]), n) for n in (NOISELESS, noise)]
    rows.append((90.0, 45.0, "MES",
                 float(threshold_symmetric(mes[0])[0]), float(threshold_symmetric(mes[1])[0]),
                 float(threshold_bob(mes[0])[0]), float(threshold_bob(mes[1])[0])))
    return cols, rows


def _table_report(cols, rows, fmt):
    if fmt == "csv":
        return "csv", (cols, rows)
    return "json", {"columns": list(cols), "rows": [list(r) for r in rows]}


def _single_row(report: dict, fmt: str):
    if fmt == "json":
        return "json", report
    flat = report["result"]
    return "csv", (list(flat), [list(flat.values())])


def cmd_sweep(args):
    noise = _noise(args)
    fig = args.figure
    if fig == "1":
        cols, rows = sweep_fig1(args.grid or 0.5)
    elif fig == "3":
        cols, rows = sweep_fig3(args.grid or 0.5, noise)
    elif fig == "4":
        if args.n <= 0:
            raise UsageError("--n must be positive")
        cols, rows = sweep_fig4(args.grid or 0.01, noise, args.n, args.seed)
    else:
        cols, rows = sweep_fig5(args.grid or 0.5, noise)
    return (*_table_report(cols, rows, args.format), {})


# optimize --------------------------------------------------------------------


def _threshold_dict(res) -> dict:
    d = asdict(res)
    d["theta_deg"] = _deg(res.theta)
    d["phi_deg"] = _deg(res.phi)
    return d


def cmd_optimize(args):
    noise = _noise(args)
    if args.mode == "di-threshold":
        result = _threshold_dict(di_threshold_symmetric(noise, args.protocol))
    elif args.mode == "sdi-threshold":
        result = _threshold_dict(sdi_threshold_bob(noise))
    elif args.mode == "best-theta":
        res = best_theta_entb92_trusted()
        result = {**asdict(res), "best_theta_deg": _deg(res.best_theta), "best_phi_deg": _deg(res.best_phi)}
    else:
        theta = crossover_theta_trusted()
        result = {"theta": theta, "theta_deg": _deg(theta)}
    return (*_single_row({"mode": args.mode, "result": result}, args.format), {})


# simulate --------------------------------------------------------------------


def cmd_simulate(args):
    if args.n <= 0:
        raise UsageError("--n must be positive")
    theta = math.radians(args.theta)
    phi = _phi(args, theta)
    noise = _noise(args)
    eff = _efficiencies(args)
    cfg = SimConfig(ProtocolParams(theta, phi, args.test_prob), noise, eff, args.n, args.seed)
    result = simulate(cfg, threads=args.threads)
    comparison = [
        {"name": c.name, "empirical": c.empirical, "sigma": c.sigma, "expected": c.expected, "z": c.z}
        for c in compare(result)
    ]
    est = estimate(result)
    try:
        empirical = asdict(empirical_rates(result))
    except (DomainError, ValueError):
        empirical = None
    report = {
        "config": {
            "theta_deg": args.theta, "phi_deg": _deg(phi), "test_prob": args.test_prob,
            "eta_a": eff.eta_a, "eta_b": eff.eta_b, "p_c": noise.p_c, "p_w": noise.p_w,
            "n_pairs": args.n, "seed": args.seed,
        },
        "statistics": comparison,
        "lengths": {"sifted": est.sifted_length, "post_selected": est.post_selected_length},
        "empirical_rates": empirical,
        "analytic_rates": asdict(rate_report(theta, phi, eff, noise)),
    }
    if args.counts_csv:
        rows = []
        labels_a = ("x", "xbar", "miss_x", "miss_xbar")
        labels_b = ("y", "ybar", "miss")
        for i in range(2):
            for j in range(2):
                for a in range(4):
                    for b in range(3):
                        rows.append((i, j, labels_a[a], labels_b[b], int(result.counts[i, j, a, b])))
        write_output(csv_text(["alice_basis", "bob_basis", "alice", "bob", "count"], rows), args.counts_csv,
                     {**_manifest(args), "argv": args._argv, "role": "counts"})
    if args.format == "csv":
        return "csv", (["name", "empirical", "sigma", "expected", "z"], [list(c.values()) for c in comparison]), {}
    return "json", report, {}


# thresholds ------------------------------------------------------------------


def cmd_thresholds(args):
    theta = math.radians(args.theta)
    phi = _phi(args, theta)
    noise = _noise(args)
    table = protocol_table(theta, phi, noise)
    out = {"theta_deg": args.theta, "phi_deg": _deg(phi), "p_c": noise.p_c, "p_w": noise.p_w}
    missing = []
    for name, formula, mode in (("eta_th", threshold_symmetric, "symmetric"), ("eta_th_b", threshold_bob, "bob")):
        try:
            out[name] = formula(table)
            out[name + "_bisection"] = threshold_by_bisection(table, mode)
        except NoViolationError:
            out[name] = None
            out[name + "_bisection"] = None
            missing.append(name)
    return (*_single_row({"result": out}, args.format), {"missing": missing})


COMMANDS = {"sweep": cmd_sweep, "optimize": cmd_optimize, "simulate": cmd_simulate, "thresholds": cmd_thresholds}


def _manifest(args) -> dict:
    """Command, parameters, seed and tool version; enough to rerun the command."""
    params = {k: v for k, v in vars(args).items() if k not in ("command", "out", "_argv", "counts_csv")}
    return {
        "command": args.command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
    }


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    try:
        kind, payload, info = COMMANDS[args.command](args)
        manifest = _manifest(args)
        text = json_text({**payload, "manifest": manifest}) if kind == "json" else csv_text(*payload)
        write_output(text, args.out, {**manifest, "argv": argv})
    except UsageError as exc:
        print(f"entb92: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"entb92: error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"entb92: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    missing = info.get("missing")
    if missing:
        print(f"entb92: no violation threshold: {', '.join(missing)}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())
