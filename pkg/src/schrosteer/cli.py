"""Command-line experiment runner.

    schrosteer <subcommand> --config <path> [--seed <u64>] [--out <dir>]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
All subcommands work on the effective potential ``V + sigma_shift * Q``.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .conditions import (
    check_conditions, rational_independence_test, resonance_breaking_scan,
    squared_mode_gram,
)
from .config import ExperimentConfig, load_config, parse_state
from .dynamics import ControlSignal, propagate_final, linearized_solve, free_evolve
from .errors import ConfigError, NumericalFailure, Stalled
from .io import write_csv, write_json, write_trajectory_csv
from .lyapunov import LyapunovConfig, auto_alpha, bump, steer_to_eigenstate
from .markov import run_chain, uniqueness_diagnostic
from .spectral import coupling_matrix, solve_dirichlet_eigs

log = logging.getLogger("schrosteer")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _setup(cfg: ExperimentConfig):
    V, Q = cfg.potential("V"), cfg.potential("Q")
    sigma = float(cfg.raw["sigma_shift"])
    V_eff = V + Q.scaled(sigma) if sigma else V
    basis = solve_dirichlet_eigs(V_eff, cfg.raw["n_modes"])
    return V, Q, basis, coupling_matrix(Q, basis)


def _outdir(cfg: ExperimentConfig):
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_spectrum(cfg: ExperimentConfig):
    _, _, basis, _ = _setup(cfg)
    out, prov = _outdir(cfg), cfg.provenance()
    rows = [(j + 1, lam, lam + basis.shift) for j, lam in enumerate(basis.lambdas)]
    files = [write_csv(out / "eigenvalues.csv", ["j", "lambda", "lambda_shifted"], rows, prov)]
    header = ["x"] + [f"e{j + 1}" for j in range(basis.n_modes)]
    rows = np.column_stack([basis.grid.x, basis.modes.T])
    files.append(write_csv(out / "modes.csv", header, rows, prov))
    return files


def _lyapunov_config(cfg: ExperimentConfig, c0, basis) -> LyapunovConfig:
    lyap = cfg.raw["lyapunov"]
    alpha = lyap["alpha"]
    if alpha == "auto":
        alpha = auto_alpha(c0, basis, float(lyap["s"]), lyap["target"])
    return LyapunovConfig(float(alpha), float(lyap["s"]), lyap["target"])


def cmd_steer(cfg: ExperimentConfig):
    _, _, basis, B = _setup(cfg)
    st = cfg.raw["steering"]
    c0 = parse_state(st["initial"], basis.n_modes)
    lcfg = _lyapunov_config(cfg, c0, basis)
    out, prov = _outdir(cfg), cfg.provenance()
    try:
        report = steer_to_eigenstate(
            c0, basis, B, lcfg, tol=st["tol"], max_iter=st["max_iter"],
            horizon_max=st["horizon_max"], cap=st["cap"], dt=st["dt"], armijo=st["armijo"],
            m_max=st["m_max"], retry_budget=st["retry_budget"], overlap_floor=st["overlap_floor"],
        )
    except Stalled as exc:
        write_json(out / "stalled.json", {"error": str(exc), "retry_log": exc.retry_log}, prov)
        raise
    payload = report.to_dict()
    payload["sigma_shift"] = cfg.raw["sigma_shift"]
    files = [write_json(out / "report.json", payload, prov)]
    if report.control is not None:
        u = report.control
        rows = zip(u.times, u.samples)
    else:
        rows = [(0.0, 0.0)]
    files.append(write_csv(out / "control.csv", ["time", "value"], rows, prov))
    hist = enumerate(report.lyapunov_history)
    files.append(write_csv(out / "lyapunov_history.csv", ["iteration", "lyapunov"], hist, prov))
    script = out / "lyapunov_history.gp"
    script.write_text(
        "# gnuplot script; run: gnuplot -p lyapunov_history.gp\n"
        "set datafile separator ','\n"
        "set logscale y\n"
        "set xlabel 'iteration'\n"
        "set ylabel 'Lyapunov value'\n"
        "plot 'lyapunov_history.csv' using 1:2 every ::1 with linespoints title 'V'\n"
    )
    files.append(script)
    return files


def _condition_rows(report):
    coupling = [(j + 1, v, int(j + 1 in report.coupling_failures))
                for j, v in enumerate(report.couplings) if j + 1 != report.target]
    resonances = [(j, p, q, d) for j, p, q, d in report.resonances]
    return coupling, resonances


def cmd_conditions(cfg: ExperimentConfig):
    _, _, basis, B = _setup(cfg)
    cond = cfg.raw["conditions"]
    target = cfg.raw["lyapunov"]["target"]
    report = check_conditions(basis, B, target, cond["coupling_tol"], cond["resonance_tol"])
    out, prov = _outdir(cfg), cfg.provenance()
    coupling, resonances = _condition_rows(report)
    return [
        write_csv(out / "couplings.csv", ["j", "coupling", "failed"], coupling, prov),
        write_csv(out / "resonances.csv", ["j", "p", "q", "defect"], resonances, prov),
        write_json(out / "conditions.json", report.to_dict(), prov),
    ]


def cmd_genericity(cfg: ExperimentConfig):
    V, Q = cfg.potential("V"), cfg.potential("Q")
    cond = cfg.raw["conditions"]
    reports = resonance_breaking_scan(
        V, Q, cfg.raw["genericity"]["sigmas"], cfg.raw["lyapunov"]["target"],
        cfg.raw["n_modes"], cond["coupling_tol"], cond["resonance_tol"],
    )
    out, prov = _outdir(cfg), cfg.provenance()
    rows = []
    for r in reports:
        off = [abs(v) for j, v in enumerate(r.couplings) if j + 1 != r.target]
        defects = [d for *_, d in r.resonances]
        rows.append((
            r.sigma, len(r.coupling_failures), " ".join(map(str, r.coupling_failures)),
            min(off), len(r.resonances), min(defects) if defects else float("nan"),
            int(r.satisfied),
        ))
    header = ["sigma", "n_coupling_failures", "coupling_failures", "min_abs_coupling",
              "n_resonances", "min_defect", "satisfied"]
    return [
        write_csv(out / "genericity.csv", header, rows, prov),
        write_json(out / "genericity.json", {"rows": [r.to_dict() for r in reports]}, prov),
    ]


def cmd_independence(cfg: ExperimentConfig):
    _, _, basis, _ = _setup(cfg)
    ind = cfg.raw["independence"]
    sigma_min, witness = rational_independence_test(basis, ind["N"], ind["denom_bound"], ind["tol"])
    out, prov = _outdir(cfg), cfg.provenance()
    G = squared_mode_gram(basis, ind["N"])
    header = ["j"] + [f"k{k + 1}" for k in range(ind["N"])]
    rows = [[j + 1, *G[j]] for j in range(ind["N"])]
    payload = {
        "N": ind["N"], "denom_bound": ind["denom_bound"], "sigma_min": sigma_min,
        "linearly_independent": sigma_min > 0 and witness is None,
        "witness": None if witness is None else [str(a) for a in witness],
    }
    return [
        write_csv(out / "gram.csv", header, rows, prov),
        write_json(out / "independence.json", payload, prov),
    ]


def cmd_random(cfg: ExperimentConfig):
    _, _, basis, B = _setup(cfg)
    r = cfg.raw["random"]
    spec = cfg.random_spec()
    seed = int(r["seed"])
    za = parse_state(r["initial_a"], basis.n_modes)
    zb = parse_state(r["initial_b"], basis.n_modes)
    out, prov = _outdir(cfg), cfg.provenance()
    run = run_chain(za, r["n_steps"], seed, spec, basis, B)
    files = [write_trajectory_csv(out / "states.csv", np.arange(run.n_steps + 1), run.states, prov)]
    diag = uniqueness_diagnostic(
        za, zb, r["n_steps"], r["replicas"], spec, basis, B, seed=seed, burn_in=r["burn_in"],
        threshold=r["threshold"], n_boot=r["n_boot"], epsilon=r["epsilon"],
        target=cfg.raw["lyapunov"]["target"],
    )
    rows = [
        (name, diag.mean_a[m], diag.se_a[m], diag.mean_b[m], diag.se_b[m], diag.z[m])
        for m, name in enumerate(diag.names)
    ]
    header = ["functional", "mean_a", "se_a", "mean_b", "se_b", "z"]
    files.append(write_csv(out / "diagnostic.csv", header, rows, prov))
    payload = diag.to_dict()
    payload["b"] = list(spec.b)
    payload["noise_positive"] = spec.positive
    files.append(write_json(out / "diagnostic.json", payload, prov))
    return files


def linearization_table(c0, basis, B, sigmas, T=None, dt=None):
    """FD residuals ``||(U(sigma w) - U(0))/sigma - R_T(w)||`` and observed orders.

    The probe is a bump-windowed tone at the first spectral gap.
    """
    gap = float(basis.lambdas[1] - basis.lambdas[0])
    T = 2 * 2 * np.pi / gap if T is None else float(T)
    span = float(basis.lambdas[-1] - basis.lambdas[0])
    dt = 2 * np.pi / span / 40 if dt is None else float(dt)
    n = int(np.ceil(T / dt))
    T = n * dt
    t = dt * np.arange(n + 1)
    w = ControlSignal(0.0, T, dt, bump(n) * np.cos(gap * t), 1.0)
    r = linearized_solve(c0, w, basis, B, T)
    free = free_evolve(c0, basis, T)
    rows = []
    for sigma in sigmas:
        fd = (propagate_final(c0, w.scaled(sigma), basis, B) - free) / sigma
        rows.append([float(sigma), float(np.linalg.norm(fd - r))])
    for k, row in enumerate(rows):
        if k == 0:
            row.append(float("nan"))
        else:
            s0, r0 = rows[k - 1][:2]
            row.append(float(np.log(r0 / row[1]) / np.log(s0 / row[0])))
    return rows


def cmd_linearize_check(cfg: ExperimentConfig):
    _, _, basis, B = _setup(cfg)
    lin = cfg.raw["linearize"]
    c0 = parse_state(lin["initial"], basis.n_modes)
    rows = linearization_table(c0, basis, B, lin["sigmas"], lin["T"], lin["dt"])
    out, prov = _outdir(cfg), cfg.provenance()
    return [
        write_csv(out / "linearize.csv", ["sigma", "residual", "observed_order"], rows, prov),
        write_json(out / "linearize.json", {"rows": rows}, prov),
    ]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "steer": cmd_steer,
    "conditions": cmd_conditions,
    "genericity": cmd_genericity,
    "independence": cmd_independence,
    "random": cmd_random,
    "linearize-check": cmd_linearize_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schrosteer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides random.seed)")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, command=args.command)
        files = COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for line in getattr(exc, "retry_log", []):
            print(f"  {line}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
