"""Command-line experiment runner.

Each subcommand reads a JSON config, runs ``trials`` independent
repetitions and writes CSV series, a ``report.json`` and a
``manifest.json`` into the output directory.  Trial ``k`` derives its
sub-seed as ``derive_seed(seed, k)``; inside a trial the Hamiltonian uses
``derive_seed(sub, 0)``, the initial state ``derive_seed(sub, 1)`` and the
norm-quantile estimator ``derive_seed(sub, 2)``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .bounds import (BoundInputs, bound_abs_infT, evaluate_all, nogaps_threshold,
                     projector_data)
from .config import ExperimentConfig, config_hash, load_config
from .ensembles import (compute_C_sigma, compute_CH0, density_bound_K, estimate_J,
                        sample_hamiltonian)
from .errors import ConfigError, NumericError, TyplabError
from .hilbert import derive_seed, projector, sample_unit_state
from .spectral import (SpectralData, diagonalize, eth_statistic, gap_count, min_subset_masses, solve_dyson,
                       spectrum_diagnostics)
from .typicality import (compute_M_matrix, compute_M_psi_weights, ensemble_curves,
                         error_series, most_t_fraction, trajectory)

__all__ = ["main", "build_parser", "COMMANDS"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# -- output helpers ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _kappa_tag(k: float) -> str:
    return format(float(k), "g")


# -- per-trial building blocks ---------------------------------------------------

def _trial_seeds(cfg: ExperimentConfig, k: int) -> dict:
    sub = derive_seed(cfg.seed, k)
    return {"index": k, "trial": sub, "hamiltonian": derive_seed(sub, 0),
            "state": derive_seed(sub, 1), "estimator": derive_seed(sub, 2)}


def _spectrum(cfg: ExperimentConfig, seeds: dict) -> SpectralData:
    H = sample_hamiltonian(cfg.ensemble, seeds["hamiltonian"])
    return diagonalize(H)


def _constants(cfg: ExperimentConfig, seeds: dict) -> dict:
    """Ensemble constants; ``K`` and ``J`` only when the profile has a positive floor."""
    c = cfg["constants"]
    prof = cfg.ensemble.profile
    out = {k: c[k] for k in ("c_c", "c_minus", "c_plus", "C_hat", "eta", "J_part", "J_samples")}
    out["sigma_minus"] = prof.sigma_minus
    out["sigma_plus"] = prof.sigma_plus
    out["C_H0"] = compute_CH0(cfg.ensemble.H0, cfg.D)
    out["K"] = out["J"] = out["C_sigma"] = None
    if prof.sigma_minus > 0:
        out["K"] = density_bound_K(prof)
        est = estimate_J(cfg.ensemble, c["eta"], c["J_samples"], seeds["estimator"], part=c["J_part"])
        out["J"] = est.J
        out["J_quantile"] = est.quantile
        out["J_branch"] = est.branch
        out["C_sigma"] = compute_C_sigma(prof.sigma_minus, prof.sigma_plus, out["C_H0"],
                                         c["c_minus"], c["c_plus"])
    return out


# -- subcommands -------------------------------------------------------------------

def _simulate_trial(cfg: ExperimentConfig, k: int, out: Path) -> dict:
    seeds = _trial_seeds(cfg, k)
    dec, mu = cfg.decomposition, cfg.mu
    spec = _spectrum(cfg, seeds)
    psi0 = sample_unit_state(dec, mu, seeds["state"])
    times = cfg.time_grid(spec.mean_gap)
    B = cfg.observable()
    traj = trajectory(spec, dec, psi0, times, B)
    M = compute_M_matrix(spec, dec)
    Mpsi = compute_M_psi_weights(spec, dec, psi0)
    diag = spectrum_diagnostics(spec.eigenvalues)
    b = cfg["bounds"]
    bound = [bound_abs_infT(BoundInputs(eps=b["eps"], delta=b["delta"], d_mu=dec.dim(mu),
                                        d_nu=dec.dim(nu), D_E=diag.D_E, D_G=diag.D_G))
             for nu in dec.labels()]
    err = error_series(traj.weights, M.row(mu), "absolute")
    frac = most_t_fraction(err.values, np.array(bound))

    tdir = out / f"trial_{k:04d}"
    tdir.mkdir(parents=True, exist_ok=True)
    names = [f"w_{nu}" for nu in dec.labels()]
    cols = [traj.times, *traj.weights.T] + ([traj.observable] if B is not None else [])
    write_csv(tdir / "trajectory.csv", ["t", *names] + (["B"] if B is not None else []), zip(*cols))
    files = [str((tdir / "trajectory.csv").relative_to(out))]
    rec = {
        "index": k,
        "mean_gap": spec.mean_gap,
        "spectral_range": spec.spectral_range,
        "eig_residual": spec.residual,
        "diagnostics": diag.to_dict() | {"min_gap": _finite(diag.min_gap)},
        "M_row": M.row(mu).tolist(),
        "M_psi0": Mpsi.tolist(),
        "bound_abs_infT": bound,
        "most_t_fraction": np.asarray(frac).tolist(),
        "tail_weights": traj.weights[-1].tolist(),
        "completeness_error": traj.completeness_error(),
        "unitarity_error": traj.unitarity_error(),
    }
    if cfg["observables"]["reference_curves"]:
        curves = ensemble_curves(spec, dec, mu, traj.times)
        write_csv(tdir / "curves.csv", ["t", *[f"w_{mu}{nu}" for nu in dec.labels()]],
                  zip(traj.times, *curves.T))
        files.append(str((tdir / "curves.csv").relative_to(out)))
        comp = error_series(traj.weights, curves, "comparative", Mpsi)
        rec["max_abs_deviation_from_curve"] = np.max(np.abs(traj.weights - curves), axis=0).tolist()
        rec["undefined_comparative"] = comp.n_undefined
    return {"record": rec, "files": files, "seeds": seeds}


def _mmatrix_trial(cfg: ExperimentConfig, k: int, out: Path) -> dict:
    seeds = _trial_seeds(cfg, k)
    spec = _spectrum(cfg, seeds)
    M = compute_M_matrix(spec, cfg.decomposition)
    rec = {
        "index": k,
        "row_sum_error": M.row_sum_error(),
        "detailed_balance_error": M.detailed_balance_error(),
        "column_identity_error": M.column_identity_error(),
        "min_entry": M.min_entry(),
        "mean_deviation": float(M.normal_typicality_deviation().mean()),
        "degenerate": M.degenerate,
    }
    return {"record": rec, "M": M, "seeds": seeds}


def _deloc_trial(cfg: ExperimentConfig, k: int, out: Path) -> dict:
    seeds = _trial_seeds(cfg, k)
    spec = _spectrum(cfg, seeds)
    grid = cfg["deloc"]["kappa_grid"]
    delta = cfg["deloc"]["delta"]
    V = spec.eigenvectors
    masses = np.column_stack([min_subset_masses(V, kap) for kap in grid])
    sup = np.max(np.abs(V), axis=0)
    consts = _constants(cfg, seeds)
    per_kappa = []
    for j, kap in enumerate(grid):
        n = int(np.argmin(masses[:, j]))
        item = {"kappa": kap, "event": bool(masses[n, j] < delta**2),
                "worst_index": n, "worst_mass": float(masses[n, j])}
        if consts["K"] is not None:
            item["nogaps_threshold"] = nogaps_threshold(kap, consts["K"], consts["J"], consts["c_c"])
        per_kappa.append(item)
    rows = [(k, n, spec.eigenvalues[n], sup[n], *masses[n], *(masses[n] < delta**2))
            for n in range(spec.D)]
    rec = {"index": k, "max_sup_norm": float(sup.max()), "per_kappa": per_kappa,
           "constants": {kk: v for kk, v in consts.items()}}
    return {"record": rec, "rows": rows, "seeds": seeds}


def _bounds_trial(cfg: ExperimentConfig, k: int, out: Path) -> dict:
    seeds = _trial_seeds(cfg, k)
    dec, mu = cfg.decomposition, cfg.mu
    spec = _spectrum(cfg, seeds)
    psi0 = sample_unit_state(dec, mu, seeds["state"])
    times = cfg.time_grid(spec.mean_gap)
    traj = trajectory(spec, dec, psi0, times)
    M = compute_M_matrix(spec, dec)
    Mpsi = compute_M_psi_weights(spec, dec, psi0)
    diag = spectrum_diagnostics(spec.eigenvalues)
    consts = _constants(cfg, seeds)
    b = cfg["bounds"]
    G = gap_count(spec.eigenvalues, b["kappa"], diag.tol)
    T = float(times[-1] - times[0])
    per_nu = []
    for nu in dec.labels():
        od = projector_data(dec.dim(nu), dec.D)
        inp = BoundInputs(
            eps=b["eps"], delta=b["delta"], eps_prime=b["eps_prime"], kappa=b["kappa"], T=T,
            d_mu=dec.dim(mu), d_nu=dec.dim(nu), D=dec.D, D_E=diag.D_E, D_G=diag.D_G, G_kappa=G,
            K=consts["K"], J=consts["J"], C_sigma=consts["C_sigma"], c_c=consts["c_c"],
            N=b.get("N"), kB=b["kB"], xi=b["xi"], tau=b["tau"], **od._asdict())
        err = np.abs(traj.weight(nu) - M.entry(mu, nu))
        abs_inf = bound_abs_infT(inp)
        emp = {"M_munu": M.entry(mu, nu), "M_psi0nu": float(Mpsi[nu - 1]),
               "max_abs_error": float(err.max()),
               "most_t_fraction_abs_infT": most_t_fraction(err, abs_inf)}
        rep = evaluate_all(inp, empirical=emp, constants=consts)
        rep["nu"] = nu
        per_nu.append(rep)
    rec = {"index": k, "diagnostics": diag.to_dict() | {"min_gap": _finite(diag.min_gap)},
           "G_kappa": G, "T": T, "per_nu": per_nu}
    return {"record": rec, "seeds": seeds}


def _eth_trial(cfg: ExperimentConfig, k: int, out: Path) -> dict:
    seeds = _trial_seeds(cfg, k)
    spec = _spectrum(cfg, seeds)
    B = cfg.observable()
    if B is None:
        B = projector(cfg.decomposition, cfg["eth"]["nu"])
    st = eth_statistic(spec, B)
    xis = cfg["eth"]["xi_grid"]
    thr = [st.threshold(x) for x in xis]
    row = (k, seeds["hamiltonian"], st.stat, *thr, *(st.stat <= t for t in thr))
    rec = {"index": k, "stat": st.stat, "hs_norm": st.hs_norm,
           "thresholds": dict(zip(map(_kappa_tag, xis), thr))}
    return {"record": rec, "row": row, "seeds": seeds}


def _run_trials(cfg, fn, out, threads):
    if threads <= 1 or cfg.trials == 1:
        return [fn(cfg, k, out) for k in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda k: fn(cfg, k, out), range(cfg.trials)))


def cmd_simulate(cfg, out, threads):
    res = _run_trials(cfg, _simulate_trial, out, threads)
    files = [f for r in res for f in r["files"]]
    report = {"command": "simulate", "dims": list(cfg["dims"]), "mu": cfg.mu,
              "trials": [r["record"] for r in res]}
    return report, files, res


def cmd_mmatrix(cfg, out, threads):
    res = _run_trials(cfg, _mmatrix_trial, out, threads)
    m = cfg.decomposition.m
    rows, dev = [], []
    for r in res:
        M = r["M"]
        D = M.normal_typicality_deviation()
        for mu in range(1, m + 1):
            rows.append((r["record"]["index"], mu, *M.row(mu)))
            dev.append((r["record"]["index"], mu, *D[mu - 1]))
    names = [f"M_{nu}" for nu in range(1, m + 1)]
    write_csv(out / "mmatrix.csv", ["trial", "mu", *names], rows)
    write_csv(out / "deviation.csv", ["trial", "mu", *[f"dev_{nu}" for nu in range(1, m + 1)]], dev)
    report = {"command": "mmatrix", "dims": list(cfg["dims"]),
              "trials": [r["record"] for r in res]}
    return report, ["mmatrix.csv", "deviation.csv"], res


def cmd_deloc(cfg, out, threads):
    res = _run_trials(cfg, _deloc_trial, out, threads)
    tags = [_kappa_tag(k) for k in cfg["deloc"]["kappa_grid"]]
    header = ["trial", "n", "E_n", "sup_norm", *[f"mass_{t}" for t in tags],
              *[f"gap_{t}" for t in tags]]
    write_csv(out / "deloc.csv", header, (row for r in res for row in r["rows"]))
    report = {"command": "deloc", "delta": cfg["deloc"]["delta"],
              "trials": [r["record"] for r in res]}
    return report, ["deloc.csv"], res


def cmd_bounds(cfg, out, threads):
    res = _run_trials(cfg, _bounds_trial, out, threads)
    report = {"command": "bounds", "dims": list(cfg["dims"]), "mu": cfg.mu,
              "trials": [r["record"] for r in res]}
    return report, [], res


def _dyson_matrix(cfg: ExperimentConfig) -> np.ndarray:
    src = cfg["dyson"]["S"]
    D = cfg.D
    if src == "flat":
        return np.full((D, D), 1.0 / D)
    if src == "zero":
        return np.zeros((D, D))
    if src == "profile":
        return cfg.ensemble.profile.sigma2
    try:
        S = np.loadtxt(cfg.resolve(src["file"]), delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read variance matrix: {exc}") from exc
    if S.shape[0] != S.shape[1]:
        raise ConfigError(f"variance matrix must be square, got {S.shape}")
    return S


def cmd_dyson(cfg, out, threads):
    d = cfg["dyson"]
    S = _dyson_matrix(cfg)
    zs = [complex(a, b) for a, b in d["z"]]
    rows, recs = [], []
    for z in zs:
        sol = solve_dyson(S, z, tol=d["tol"], max_iter=d["max_iter"], damping=d["damping"])
        rows.extend((z.real, z.imag, i, m.real, m.imag, sol.residual) for i, m in enumerate(sol.m))
        recs.append({"z": [z.real, z.imag], "iterations": sol.iterations,
                     "residual": sol.residual, "sup_abs_m": float(np.max(np.abs(sol.m)))})
    write_csv(out / "dyson.csv", ["z_re", "z_im", "i", "re_m", "im_m", "residual"], rows)
    report = {"command": "dyson", "D": int(S.shape[0]), "tol": d["tol"], "solutions": recs,
              "sup_abs_m_on_grid": max(r["sup_abs_m"] for r in recs)}
    return report, ["dyson.csv"], []


def cmd_eth(cfg, out, threads):
    res = _run_trials(cfg, _eth_trial, out, threads)
    tags = [_kappa_tag(x) for x in cfg["eth"]["xi_grid"]]
    header = ["trial", "seed", "stat", *[f"threshold_{t}" for t in tags], *[f"pass_{t}" for t in tags]]
    write_csv(out / "eth.csv", header, (r["row"] for r in res))
    report = {"command": "eth", "nu": cfg["eth"]["nu"], "trials": [r["record"] for r in res]}
    return report, ["eth.csv"], res


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "mmatrix": cmd_mmatrix,
    "deloc": cmd_deloc,
    "bounds": cmd_bounds,
    "dyson": cmd_dyson,
    "eth": cmd_eth,
}


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="typlab", description="Typicality and delocalization lab.")
    p.add_argument("--version", action="version", version=f"typlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for trials (default: $TYPLAB_THREADS or 1)")
    return p


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("TYPLAB_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"TYPLAB_THREADS must be an integer, got {env!r}")
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def run(command: str, cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run one subcommand and write its artifacts; returns the manifest."""
    if cfg.seed >= 2**64 or cfg.seed < 0:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report, files, res = COMMANDS[command](cfg, out, threads)
    elapsed = time.perf_counter() - t0
    write_json(out / "report.json", report)
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.raw,
        "config_hash": config_hash(cfg.raw),
        "seed": cfg.seed,
        "sub_seeds": [r["seeds"] for r in res],
        "threads": threads,
        "outputs": sorted(files + ["report.json"]),
        "timings": {"total_s": elapsed},
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
        threads = _threads(args.threads)
        run(args.command, cfg, threads)
    except NumericError as exc:
        print(f"typlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"typlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TyplabError, ValueError) as exc:
        print(f"typlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
