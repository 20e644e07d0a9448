"""``gpestab {solve|classify|evolve|control|sweep|elliptic-check} --config PATH [--out DIR]``

Exit codes: 0 success, 1 configuration / input error, 2 nonconvergence,
3 numeric failure.

Output formats (every file starts with a ``#`` manifest line, or carries a
``manifest`` key for JSON):

  classify   verdict.csv   classification,route,g1,mu,mu_s,mu_minus_mu_s,band_lower,
                           band_upper,alpha_g,beta_g,min_product_eigenvalue_real_part,
                           has_complex_product_eigenvalue,lambda_growth,eps
  evolve     linearized:   time,norm_phi1,norm_phi2
             gpe:          time,norm,energy,deviation
  sweep      sweep.csv     V0,k,g1,mu,N,status,classification,route,mu_s,mu_minus_mu_s,
                           band_lower,band_upper,alpha_g,beta_g,
                           min_product_eigenvalue_real_part,
                           has_complex_product_eigenvalue,lambda_growth,residual,message
  elliptic-check           k,check,value,tolerance,passed
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .control import Variant, control_experiment, select_mode
from .elliptic import complete_K, jacobi_sn_cn_dn
from .evolution import (
    CollapseError,
    IntegratorError,
    PerturbationField,
    default_dt,
    evolve_gpe,
    evolve_linearized,
    growth_rate,
)
from .model import (
    ConfigurationError,
    CosineLattice,
    EllipticSnSquared,
    Grid,
    Zero,
    load_tabulated,
    potential_period,
    sample_potential,
)
from .spectral import ContractError, EigenSolverError, classify, verdicts_to_csv
from .stationary import (
    DomainError,
    NonConvergenceError,
    exact_sn_state,
    load_state,
    residual,
    save_state,
    solve_fixed_N,
    solve_newton,
    state_to_dict,
    thomas_fermi_state,
)
from .sweep import SweepPlan, records_to_csv, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_NUMERIC = 0, 1, 2, 3


def manifest_line(subcommand: str, digest: str) -> str:
    return f"gpestab {__version__} subcommand={subcommand} config_sha256={digest}"


def _out(args, name: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _write_json(path: Path, payload: dict, manifest: str) -> None:
    path.write_text(json.dumps(dict(payload, manifest=manifest), indent=1))


def _write_text(path: Path, text: str, manifest: str) -> None:
    path.write_text(f"# {manifest}\n{text}")


def _build_potential_and_grid(cfg: dict):
    p, g = cfg["potential"], cfg["grid"]
    variant = p["variant"]
    try:
        if variant == "Zero":
            potential = Zero()
        elif variant == "EllipticSnSquared":
            if p["V0"] is None or p["k"] is None:
                raise ConfigurationError("[potential] EllipticSnSquared needs V0 and k")
            potential = EllipticSnSquared(p["V0"], p["k"])
        elif variant == "CosineLattice":
            if p["V0"] is None or p["wavenumber"] is None:
                raise ConfigurationError("[potential] CosineLattice needs V0 and wavenumber")
            potential = CosineLattice(p["V0"], p["wavenumber"])
        elif variant == "Tabulated":
            potential = None
        else:
            raise ConfigurationError(f"[potential] variant: unknown {variant!r}")
    except ConfigurationError as err:
        msg = str(err)
        if not msg.startswith("["):
            field = "k" if "k must" in msg else "wavenumber" if "wavenumber" in msg else "variant"
            msg = f"[potential] {field}: {msg}"
        raise ConfigurationError(msg) from err
    if g["backend"] not in ("fd", "spectral"):
        raise ConfigurationError(f"[grid] backend: unknown {g['backend']!r}")
    if potential is not None and potential_period(potential) is not None:
        if g["period_length"] is not None:
            raise ConfigurationError("[grid] period_length is implied by the lattice; use n_periods")
        grid = Grid.for_potential(potential, g["n_points"], g["n_periods"])
    else:
        if g["period_length"] is None:
            raise ConfigurationError("[grid] period_length is required for this potential")
        grid = Grid(g["n_points"], g["period_length"])
    if potential is None:
        if p["file"] is None:
            raise ConfigurationError("[potential] Tabulated needs file")
        potential = load_tabulated(p["file"], grid)
    return potential, grid


def cmd_solve(args) -> int:
    cfg, digest = load_config(args.config, "solve")
    s = cfg["solve"]
    potential, grid = _build_potential_and_grid(cfg)
    backend = cfg["grid"]["backend"]
    g1, method = s["g1"], s["method"]
    if method == "exact":
        if not isinstance(potential, EllipticSnSquared):
            raise ConfigurationError("[solve] method: exact needs the EllipticSnSquared potential")
        state = exact_sn_state(potential.V0, potential.k, g1, grid, backend=backend)
    elif method == "newton":
        if s["mu"] is None:
            raise ConfigurationError("[solve] mu is required for method = newton")
        mu = s["mu"]
        V = sample_potential(potential, grid)
        guess_kind = s["guess"]
        if guess_kind == "auto":
            guess_kind = "tf" if g1 > 0 and np.any(mu > V) else "uniform"
        if guess_kind == "uniform":
            amp = s["guess_amplitude"]
            if amp is None:
                amp = math.sqrt(abs(mu / g1)) if g1 != 0 and mu != 0 else 1.0
            guess = np.full(grid.n_points, amp)
        elif guess_kind == "tf":
            guess = thomas_fermi_state(potential, mu, g1, grid).R_tf
        elif guess_kind == "exact":
            if not isinstance(potential, EllipticSnSquared):
                raise ConfigurationError("[solve] guess: exact needs the EllipticSnSquared potential")
            guess = exact_sn_state(potential.V0, potential.k, g1, grid, backend=backend).R
        else:
            raise ConfigurationError(f"[solve] guess: unknown {guess_kind!r}")
        state = solve_newton(potential, mu, g1, guess, grid, s["tol"], backend, s["max_iter"])
    elif method == "fixed_N":
        if s["N"] is None:
            raise ConfigurationError("[solve] N is required for method = fixed_N")
        state = solve_fixed_N(potential, s["N"], s["n_lattice"], g1, grid, s["tol"], backend)
    else:
        raise ConfigurationError(f"[solve] method: unknown {method!r}")
    path = _out(args, cfg["output"]["state"])
    _write_json(path, state_to_dict(state), manifest_line("solve", digest))
    res = residual(state)
    print(f"mu = {state.mu:.12g}")
    print(f"N = {state.atom_number(s['n_lattice']):.12g}")
    print(f"residual = {res:.3e}")
    print(f"state written to {path}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg, digest = load_config(args.config, "classify")
    state_path = args.state or cfg["classify"]["state"]
    if state_path is None:
        raise ConfigurationError("[classify] state is required (or pass --state)")
    state = load_state(state_path)
    verdict = classify(state, cfg["classify"]["eps"])
    rec = verdict.as_record()
    manifest = manifest_line("classify", digest)
    _write_json(_out(args, cfg["output"]["verdict"]),
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}, manifest)
    _write_text(_out(args, cfg["output"]["csv"]), verdicts_to_csv([rec]), manifest)
    print(f"classification = {verdict.classification.value}")
    print(f"route = {verdict.route}")
    print(f"alpha_g = {verdict.alpha_g:.6g}")
    print(f"beta_g = {verdict.beta_g:.6g}")
    print(f"lambda_growth = {verdict.lambda_growth:.6g}")
    print(f"mu = {verdict.mu:.12g}")
    print(f"mu_s = {verdict.mu_s:.12g}")
    print(f"mu - mu_s = {verdict.mu - verdict.mu_s:.12g}")
    band = verdict.instability_band
    print(f"instability_band = {band if band is None else (round(band[0], 12), round(band[1], 12))}")
    return EXIT_OK


def _initial_fields(state, e: dict):
    if e["init"] == "mode":
        mode = select_mode(state, e["mode_index"])
        return e["T1_0"] * mode.phi1, e["T2_0"] * mode.phi2
    if e["init"] == "fourier":
        x, L = state.grid.points, state.grid.period_length
        phi = np.cos(2 * np.pi * e["fourier_index"] * x / L)
        return e["T1_0"] * phi, e["T2_0"] * phi
    raise ConfigurationError(f"[evolve] init: unknown {e['init']!r}")


def cmd_evolve(args) -> int:
    cfg, digest = load_config(args.config, "evolve")
    e = cfg["evolve"]
    state = load_state(e["state"])
    phi1, phi2 = _initial_fields(state, e)
    manifest = manifest_line("evolve", digest)
    path = _out(args, cfg["output"]["trajectory"])
    if e["equation"] == "linearized":
        dt = e["dt"] or default_dt(state)
        steps = max(3, math.ceil(e["t_end"] / dt - 1e-9))
        traj = evolve_linearized(state, PerturbationField(phi1, phi2), dt, steps, e["scheme"], e["record_every"])
        lo = e["fit_from"] if e["fit_from"] is not None else 0.5 * traj.times[-1]
        fit = growth_rate(traj, (lo, traj.times[-1]))
        _write_text(path, traj.to_csv(), manifest)
        print(f"growth_rate = {fit.rate:.6g} (fit residual {fit.fit_residual:.2e}"
              f"{', low confidence' if fit.low_confidence else ''})")
    elif e["equation"] == "gpe":
        dt = e["dt"] or 1e-3
        steps = max(1, math.ceil(e["t_end"] / dt - 1e-9))
        psi0 = state.R + e["epsilon"] * (phi1 + 1j * phi2)
        traj = evolve_gpe(psi0, state.potential, state.g1, state.grid, dt, steps, e["record_every"])
        dev = [state.grid.norm(np.abs(p) - np.abs(state.R)) for p in traj.snapshots]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "norm", "energy", "deviation"])
        for row in zip(traj.times, traj.norms, traj.energies, dev):
            w.writerow([f"{v:.12g}" for v in row])
        _write_text(path, buf.getvalue(), manifest)
        drift = abs(traj.norms[-1] - traj.norms[0]) / traj.norms[0]
        print(f"relative norm drift = {drift:.3e}")
    else:
        raise ConfigurationError(f"[evolve] equation: unknown {e['equation']!r}")
    print(f"trajectory written to {path}")
    return EXIT_OK


def cmd_control(args) -> int:
    cfg, digest = load_config(args.config, "control")
    c = cfg["control"]
    state = load_state(c["state"])
    variant = c["variant"]
    if variant == "pair":
        variant = Variant.SUPPRESSED.value
    try:
        variant = Variant(variant)
    except ValueError:
        raise ConfigurationError(f"[control] variant: unknown {c['variant']!r}") from None
    report = control_experiment(state, c["mode_index"], variant, c["window"], c["dt"], c["magnitude"],
                                c["record_every"])
    path = _out(args, cfg["output"]["report"])
    _write_json(path, json.loads(report.to_json()), manifest_line("control", digest))
    print(f"product eigenvalue = {report.nu:.6g}")
    print(f"{report.controlled.variant}: criterion {report.controlled.criterion.value}, "
          f"max norm ratio {report.controlled.max_norm_ratio:.6g}")
    print(f"{report.reference.variant}: criterion {report.reference.criterion.value}, "
          f"max norm ratio {report.reference.max_norm_ratio:.6g}")
    print(f"suppression ratio = {report.suppression_ratio:.6g}")
    print(f"report written to {path}")
    return EXIT_OK


def plan_from_config(cfg: dict) -> SweepPlan:
    s = cfg["sweep"]
    params = [p for p in ("V0", "k", "g1", "mu", "N") if s[p] is not None]
    given_order = [k for k in s["_given"] if k in params]
    if s["axes"]:
        order = [a.strip() for a in s["axes"].split(",") if a.strip()]
    else:
        order = [p for p in given_order if len(s[p]) > 1]
    axes = tuple((p, s[p]) for p in order)
    fixed = {p: s[p][0] for p in params if p not in order}
    for p in params:
        if p not in order and len(s[p]) != 1:
            raise ConfigurationError(f"[sweep] {p} has several values but is not an axis")
    if not axes:
        first = given_order[0] if given_order else "k"
        axes = ((first, s[first]),)
        fixed.pop(first, None)
    try:
        return SweepPlan(axes=axes, fixed=fixed, n_points=s["n_points"], n_periods=s["n_periods"],
                         n_lattice=s["n_lattice"], backend=s["backend"], newton_tol=s["newton_tol"],
                         eps=s["eps"], workers=s["workers"], timeout=s["timeout"], max_points=s["max_points"])
    except ValueError as err:
        raise ConfigurationError(f"[sweep] {err}") from err


def cmd_sweep(args) -> int:
    cfg, digest = load_config(args.config, "sweep")
    plan = plan_from_config(cfg)
    records = run_sweep(plan)
    manifest = manifest_line("sweep", digest)
    path = _out(args, cfg["output"]["csv"])
    path.write_text(records_to_csv(records, manifest))
    side = {
        "axes": [[n, list(v)] for n, v in plan.axes], "fixed": plan.fixed, "n_points": plan.n_points,
        "n_periods": plan.n_periods, "n_lattice": plan.n_lattice, "backend": plan.backend,
        "newton_tol": plan.newton_tol, "eps": plan.eps, "workers": plan.workers,
        "points": plan.size, "failed": sum(r.get("status") != "ok" for r in records),
    }
    _write_json(_out(args, cfg["output"]["manifest"]), side, manifest)
    print(f"{plan.size} points, {side['failed']} failed; results in {path}")
    return EXIT_OK


def elliptic_identity_suite(moduli, n_samples: int = 201, x_max: float = 20.0) -> list[dict]:
    rows = []
    x = np.linspace(-x_max, x_max, n_samples)
    for k in moduli:
        s, c, d = jacobi_sn_cn_dn(x, k)
        rows.append(dict(k=k, check="sn^2+cn^2-1", value=float(np.max(np.abs(s * s + c * c - 1))), tolerance=1e-12))
        rows.append(dict(k=k, check="dn^2+k^2sn^2-1", value=float(np.max(np.abs(d * d + k * k * s * s - 1))),
                         tolerance=1e-12))
        errs = []
        for hstep in (1e-2, 5e-3, 2.5e-3):
            fd = (jacobi_sn_cn_dn(x + hstep, k)[0] - jacobi_sn_cn_dn(x - hstep, k)[0]) / (2 * hstep)
            errs.append(float(np.max(np.abs(fd - c * d))))
        order = min(math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2]))
        rows.append(dict(k=k, check="d/dx sn = cn dn (observed order)", value=order, tolerance=1.9))
        if k < 1:
            K = complete_K(k)
            per = float(np.max(np.abs(jacobi_sn_cn_dn(x + 4 * K, k)[0] - s)))
            rows.append(dict(k=k, check="sn(x+4K)-sn(x)", value=per, tolerance=1e-10))
    for r in rows:
        r["passed"] = r["value"] >= r["tolerance"] if r["check"].endswith("(observed order)") \
            else r["value"] < r["tolerance"]
    return rows


def cmd_elliptic_check(args) -> int:
    cfg, digest = load_config(args.config, "elliptic-check")
    e = cfg["elliptic"]
    rows = elliptic_identity_suite(e["moduli"], e["n_samples"], e["x_max"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "check", "value", "tolerance", "passed"])
    for r in rows:
        w.writerow([f"{r['k']:.12g}", r["check"], f"{r['value']:.6e}", f"{r['tolerance']:g}",
                    "true" if r["passed"] else "false"])
    path = _out(args, cfg["output"]["report"])
    _write_text(path, buf.getvalue(), manifest_line("elliptic-check", digest))
    failed = [r for r in rows if not r["passed"]]
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  k={r['k']:<6g} {r['check']}: {r['value']:.3e}")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "classify": cmd_classify,
    "evolve": cmd_evolve,
    "control": cmd_control,
    "sweep": cmd_sweep,
    "elliptic-check": cmd_elliptic_check,
}


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; argparse would exit with 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpestab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"gpestab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=name not in ("elliptic-check", "classify"), default=None)
        p.add_argument("--out", default=".")
        if name == "classify":
            p.add_argument("--state", default=None, help="state file (overrides [classify] state)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, DomainError, ContractError, ValueError, OSError, IndexError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as err:
        print(f"error: {err} (last residual {err.last_residual:.3e})", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (IntegratorError, CollapseError, EigenSolverError, ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
