"""Command line entry point: ``multiwave <scenario-kind> --config file.ini --out dir``.

Exit status 0 on success, 1 on configuration errors, 2 on numerical failure.
Every failure prints one line ``FAIL <reason-code> <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from dataclasses import replace
from fractions import Fraction
from itertools import product
from math import inf

import numpy as np

from . import config as cfgmod
from .config import ScenarioConfig
from .data import DEFAULT_WIDTH, gaussian_bumps, single_mode, smooth_source, strichartz_instance, zero_mean
from .errors import ConfigError, MultiwaveError
from .multipoint import LinearProblem, SourceSamples, energy, solve_linear, verify_solution
from .nonlinear import (
    Nonlinearity,
    PicardConfig,
    continue_solution,
    eval_nonlinearity_values,
    solve_nonlinear,
    theorem5_constants,
)
from .operators import build_operator
from .oracle import compare, rk4_integrate, shooting_multipoint, stable_step
from .spectral import (
    Field,
    GridSpec,
    fft_values,
    ifft_values,
    lebesgue_norm_values,
    read_field,
    set_workers,
    write_field,
)
from .strichartz import (
    GapRelation,
    as_exponent,
    classify_pair,
    dispersive_ratio,
    fmt,
    recip,
    sharp_pair_for_gap,
    strichartz_report,
)

log = logging.getLogger("multiwave")

CSV_HEADER = "# multiwave-csv v1"
DEFAULT_EXPONENTS = ("2", "5/2", "3", "4", "6", "8", "inf")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (Fraction,)) or v == inf:
        return fmt(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return cfgmod.format_complex(v)
    if isinstance(v, tuple):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(path: str, rows: list[dict], columns: list[str] | None = None) -> None:
    """Write rows under the versioned header; replace the target atomically."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_HEADER:
            raise ValueError(f"{path}: missing '{CSV_HEADER}' header")
        return list(csv.DictReader(fh))


def _write_snapshot(path: str, f: Field) -> None:
    tmp = path + ".tmp"
    write_field(tmp, f)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------


def build_problem(cfg: ScenarioConfig) -> tuple[LinearProblem, object]:
    grid = cfg.grid()
    op = cfg.operator()
    spec = cfg.multipoint()
    d = op.hdim
    horizon = cfg.get("solve", "horizon", 1.0)
    kind = cfg.get("data", "kind", "gaussian")
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    if kind == "gaussian":
        count = cfg.get("data", "bumps", 1)
        width = cfg.get("data", "width", DEFAULT_WIDTH)
        phi = gaussian_bumps(grid, d, rng, count=count, width=width)
        psi = gaussian_bumps(grid, d, rng, count=count, width=width)
        psi = Field(grid, cfg.get("data", "psi_scale", 1.0) * psi.values)
    elif kind == "single-mode":
        amp = cfg.get("data", "amplitude", [1.0])
        phi = single_mode(grid, d, cfg.get("data", "mode", [1] + [0] * (grid.n - 1)),
                          amp[0] if len(amp) == 1 else amp)
        psi = Field.zeros(grid, d)
    elif kind == "file":
        phi = read_field(cfg.get("data", "phi_file"), grid.box_length)
        psi = read_field(cfg.get("data", "psi_file"), grid.box_length)
        if phi.grid.points != grid.points or psi.grid.points != grid.points:
            raise ConfigError("snapshot files do not match the [grid] block", cfg.line_of("data"), "bad-value")
    else:
        phi, psi = Field.zeros(grid, d), Field.zeros(grid, d)
    if cfg.get("data", "zero_mean", False):
        phi, psi = zero_mean(phi), zero_mean(psi)
    source = None
    if cfg.get("source", "kind", "none") == "gaussian":
        steps = cfg.get("source", "steps", cfg.get("solve", "steps", 64))
        source = smooth_source(grid, d, rng, horizon, steps)
        source = SourceSamples(source.times, cfg.get("source", "amplitude", 1.0) * source.values)
    try:
        problem = LinearProblem(grid, op, phi, psi, horizon, source)
    except MultiwaveError as err:
        raise ConfigError(str(err), None, err.reason) from None
    return problem, spec


def _solve_kw(cfg):
    kw = {"g2_half_term": cfg.get("solve", "g2_half_term", False),
          "g2_sine_kernel": cfg.get("solve", "g2_sine_kernel", False)}
    if cfg.get("solve", "cap") is not None:
        kw["cap"] = cfg.get("solve", "cap")
    return kw


def _trajectory_rows(traj, op):
    phys = traj.physical("u")
    e = energy(traj, op)
    rows = []
    for i, t in enumerate(traj.times):
        rows.append({
            "t": t,
            "l2_u": float(lebesgue_norm_values(phys[i], traj.grid, 2)),
            "sup_u": float(np.abs(phys[i]).max()),
            "energy": e[i],
        })
    return rows


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def _out(out_dir, cfg, name):
    prefix = cfg.get("output", "prefix", cfg.kind)
    return os.path.join(out_dir, f"{prefix}_{name}")


def run_solve_linear(cfg, out_dir, verify):
    problem, spec = build_problem(cfg)
    steps = cfg.get("solve", "steps", 64)
    traj, report = solve_linear(problem, spec, steps, **_solve_kw(cfg))
    row = report.row()
    if verify:
        src = problem.source
        if src is not None and (len(src.times) != len(traj.times) or not np.allclose(src.times, traj.times)):
            src = _resample(src, traj.times)
        row.update({f"verify_{k}": v for k, v in verify_solution(traj, problem, spec, source=src).row().items()})
    paths = [_out(out_dir, cfg, "report.csv"), _out(out_dir, cfg, "trajectory.csv")]
    write_csv(paths[0], [row])
    write_csv(paths[1], _trajectory_rows(traj, problem.operator))
    if cfg.get("output", "snapshots", False):
        paths.append(_out(out_dir, cfg, "final.mwf"))
        _write_snapshot(paths[-1], traj.snapshot(len(traj.times) - 1))
    return paths


def _resample(src: SourceSamples, times) -> SourceSamples:
    h = src.times[1] - src.times[0]
    vals = []
    for t in times:
        j = min(int(np.floor(t / h + 1e-9)), len(src.times) - 2)
        th = t / h - j
        vals.append((1 - th) * src.values[j] + th * src.values[j + 1])
    return SourceSamples(np.asarray(times), np.stack(vals))


def run_solve_nlw(cfg, out_dir, verify):
    problem, spec = build_problem(cfg)
    nl = Nonlinearity(cfg.get("nonlinearity", "kind", "scalar_power"),
                      cfg.get("nonlinearity", "lambda", 1.0), cfg.get("nonlinearity", "k", 3.0))
    pc = PicardConfig(
        max_iter=cfg.get("picard", "max_iter", 50),
        tol=cfg.get("picard", "tol", 1e-10),
        M=cfg.get("picard", "M"),
        p=cfg.get("picard", "p"),
        q=float(as_exponent(cfg.get("picard", "q", inf))) if cfg.get("picard", "q", inf) != inf else inf,
        r=float(as_exponent(cfg.get("picard", "r", 2))) if cfg.get("picard", "r", 2) != inf else inf,
        dt=cfg.get("picard", "dt", 1 / 64),
        window=cfg.get("picard", "window"),
    )
    kw = _solve_kw(cfg)
    t_star = cfg.get("picard", "t_star")
    if t_star is not None:
        traj, reports = continue_solution(problem, spec, nl, pc, t_star, **kw)
    else:
        traj, rep = solve_nonlinear(problem, spec, nl, pc, **kw)
        reports = [rep]
    rows = []
    for w, rep in enumerate(reports):
        for r in rep.rows():
            rows.append({"window": w, "window_length": rep.window, **r})
    paths = [_out(out_dir, cfg, "picard.csv"), _out(out_dir, cfg, "trajectory.csv")]
    write_csv(paths[0], rows, ["window", "window_length", "iteration", "difference", "ratio", "norm"])
    write_csv(paths[1], _trajectory_rows(traj, problem.operator))
    if verify and t_star is None:
        values = eval_nonlinearity_values(nl, traj.physical("u"))
        if problem.source is not None:
            values = values + _resample(problem.source, traj.times).values
        window_problem = LinearProblem(problem.grid, problem.operator, problem.phi, problem.psi,
                                       float(traj.times[-1]), SourceSamples(traj.times, values))
        vr = verify_solution(traj, window_problem, spec)
        paths.append(_out(out_dir, cfg, "verify.csv"))
        write_csv(paths[-1], [vr.row()])
    if cfg.get("output", "snapshots", False):
        paths.append(_out(out_dir, cfg, "final.mwf"))
        _write_snapshot(paths[-1], traj.snapshot(len(traj.times) - 1))
    return paths


def admissibility_table(n_values, q_values, r_values) -> list[dict]:
    rows = []
    for n, q, r in product(n_values, q_values, r_values):
        v = classify_pair(n, q, r)
        rows.append({"n": n, "q": as_exponent(q), "r": as_exponent(r), "verdict":
                     "admissible" if v.admissible else ("excluded" if v.excluded_triple else "rejected"),
                     "sharp": v.sharp, "endpoint": v.endpoint})
    return rows


def run_check_admissible(cfg, out_dir, verify):
    n_values = cfg.get("exponents", "n_values", [2, 3, 4, 5, 6])
    q_values = cfg.get("exponents", "q_values", [as_exponent(x) for x in DEFAULT_EXPONENTS])
    r_values = cfg.get("exponents", "r_values", [as_exponent(x) for x in DEFAULT_EXPONENTS])
    paths = [_out(out_dir, cfg, "admissibility.csv")]
    write_csv(paths[0], admissibility_table(n_values, q_values, r_values),
              ["n", "q", "r", "verdict", "sharp", "endpoint"])
    const_rows = []
    for n in n_values:
        if n >= 4:
            c = theorem5_constants(n)
            const_rows.append({"n": n, "gamma": c["gamma"], "k0": c["k0"], "q0": c["q0"], "r0": c["r0"],
                               "r0_admissible": c["r0_admissible"], "r0_below_2": c["r0_below_2"],
                               "sharp_q": c["sharp_pair"][0], "sharp_r": c["sharp_pair"][1]})
    if const_rows:
        paths.append(_out(out_dir, cfg, "constants.csv"))
        write_csv(paths[-1], const_rows)
    return paths


def run_verify_dispersive(cfg, out_dir, verify):
    n = cfg.get("grid", "n", 2)
    grid = cfg.grid() if cfg.has("grid") else GridSpec.cube(n, 1024, 2 * np.pi * 64)
    op = cfg.operator() if cfg.has("operator") else build_operator([[cfg.get("dispersive", "mass", 1.0)]])
    width = cfg.get("dispersive", "width", 1.0)
    if cfg.get("data", "kind", "gaussian") == "gaussian":
        rng = np.random.default_rng(cfg.seed)
        data = gaussian_bumps(grid, op.hdim, rng, width=width)
    else:
        data = build_problem(cfg)[0].phi
    t_max = cfg.get("dispersive", "t_max", min(grid.box_length) / 4 * 0.9)
    times = np.geomspace(cfg.get("dispersive", "t_min", 5.0), t_max, cfg.get("dispersive", "samples", 12))
    rep = dispersive_ratio(op, cfg.get("dispersive", "alpha", 0.0), cfg.get("dispersive", "p", inf), data, times)
    paths = [_out(out_dir, cfg, "dispersive.csv"), _out(out_dir, cfg, "dispersive_fit.csv")]
    write_csv(paths[0], list(rep.rows()), ["t", "norm", "ratio"])
    write_csv(paths[1], [{"predicted_exponent": rep.predicted_exponent, "fitted_exponent": rep.fit.exponent,
                          "fit_rms": rep.fit.rms, "truncated_exponent": rep.truncated_fit.exponent,
                          "truncated_rms": rep.truncated_fit.rms, "better_model": rep.better_model}])
    return paths


def gap_from_config(cfg, n) -> GapRelation:
    gamma = cfg.get("exponents", "gamma", Fraction(3, 8))
    q, r = sharp_pair_for_gap(n, gamma)
    q = cfg.get("exponents", "q", q)
    r = cfg.get("exponents", "r", r)
    q_tilde = cfg.get("exponents", "q_tilde", Fraction(1))
    r_tilde = cfg.get("exponents", "r_tilde")
    if r_tilde is None:
        # 1/q~ + n/r~ - 2 = n/2 - gamma
        inv = (Fraction(n, 2) - Fraction(gamma) + 2 - recip(q_tilde)) / n
        r_tilde = inf if inv == 0 else 1 / inv
    return GapRelation(n, gamma, q, r, q_tilde, r_tilde)


def run_verify_strichartz(cfg, out_dir, verify):
    grid = cfg.grid() if cfg.has("grid") else GridSpec.cube(2, 32, 16.0)
    gap = gap_from_config(cfg, grid.n)
    alphas = cfg.get("exponents", "alphas", [0.0, 0.5])
    count = cfg.get("ensemble", "instances", 10)
    steps = cfg.get("ensemble", "steps", 64)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(count):
        alpha = alphas[i % len(alphas)]
        problem, spec = strichartz_instance(grid, alpha, rng, hdim=cfg.get("ensemble", "hdim", 1), steps=steps)
        g = replace(gap, alpha=Fraction(alpha).limit_denominator(100))
        rep = strichartz_report(problem, spec, g, steps=steps)
        rows.append({"instance": i, "alpha": alpha, "lhs": rep.lhs, "rhs": rep.rhs, "ratio": rep.ratio})
    paths = [_out(out_dir, cfg, "strichartz.csv")]
    write_csv(paths[0], rows, ["instance", "alpha", "lhs", "rhs", "ratio"])
    return paths


def run_oracle_compare(cfg, out_dir, verify):
    problem, spec = build_problem(cfg)
    dt = cfg.get("solve", "dt")
    kw = _solve_kw(cfg)
    _, report = solve_linear(problem, spec, 8, **kw)
    shot = shooting_multipoint(problem, spec, dt)
    rows = []
    for name, ana, ref in (("u0", report.u0_hat, shot.u0), ("u1", report.u1_hat, shot.u1)):
        ref_hat = fft_values(ref.values, problem.grid.n)
        diff = np.linalg.norm(ana - ref_hat)
        rows.append({"quantity": name, "abs_diff": diff,
                     "rel_diff": diff / max(np.linalg.norm(ana), 1e-300)})
    bound = stable_step(problem)
    step = dt if dt is not None else problem.horizon / int(np.ceil(problem.horizon / (0.25 * bound)))
    nsteps = int(round(problem.horizon / step))
    save = max(1, nsteps // cfg.get("solve", "steps", 64))
    while nsteps % save:
        save -= 1
    n = problem.grid.n
    rk = rk4_integrate(problem, Field(problem.grid, ifft_values(report.u0_hat, n)),
                       Field(problem.grid, ifft_values(report.u1_hat, n)),
                       problem.horizon / nsteps, save_every=save)
    ana_traj, _ = solve_linear(problem, spec, rk.times, **kw)
    for key, val in compare(ana_traj, rk).items():
        rows.append({"quantity": f"trajectory_{key}", "abs_diff": val, "rel_diff": float("nan")})
    rows.append({"quantity": "shooting_min_singular_value", "abs_diff": shot.min_singular_value,
                 "rel_diff": float("nan")})
    paths = [_out(out_dir, cfg, "oracle.csv")]
    write_csv(paths[0], rows, ["quantity", "abs_diff", "rel_diff"])
    return paths


RUNNERS = {
    "solve-linear": run_solve_linear,
    "solve-nlw": run_solve_nlw,
    "check-admissible": run_check_admissible,
    "verify-dispersive": run_verify_dispersive,
    "verify-strichartz": run_verify_strichartz,
    "oracle-compare": run_oracle_compare,
}


def run_scenario(cfg: ScenarioConfig, out_dir: str, *, verify: bool = False) -> list[str]:
    """Execute a parsed scenario and return the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    return RUNNERS[cfg.kind](cfg, out_dir, verify)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multiwave", description="Multipoint wave problems on a periodic box.")
    ap.add_argument("kind", nargs="?", help="scenario kind; overrides [scenario] kind when given")
    ap.add_argument("--config", required=False, help="scenario file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    ap.add_argument("--seed", type=int, default=None, help="overrides [data] seed")
    ap.add_argument("--verify", action="store_true", help="run residual verification after solves")
    ap.add_argument("--template", action="store_true", help="print the linear scenario template and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _fail(reason: str, message: str, code: int) -> int:
    print(f"FAIL {reason} {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.template:
        sys.stdout.write(cfgmod.TEMPLATE_LINEAR)
        return 0
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        elif args.kind:
            text = f"[scenario]\nkind = {args.kind}\n"
        else:
            raise ConfigError("no --config file and no scenario kind given", None, "missing-config")
        if args.kind:
            lines = text.splitlines()
            if not any(line.strip().startswith("[scenario]") for line in lines):
                text = f"[scenario]\nkind = {args.kind}\n" + text
        cfg = cfgmod.parse_config(text, seed=args.seed)
        if args.kind and args.kind != cfg.kind:
            if args.kind not in cfgmod.SCENARIO_KINDS:
                raise ConfigError(f"unknown scenario kind {args.kind!r}", None, "unknown-scenario")
            cfg.kind = args.kind
            cfg.sections["scenario"]["kind"] = args.kind
            cfgmod.validate(cfg)
        set_workers(args.threads)
        paths = run_scenario(cfg, args.out, verify=args.verify)
    except OSError as err:
        return _fail("io-error", err, 1)
    except ConfigError as err:
        return _fail(err.reason, err, 1)
    except MultiwaveError as err:
        return _fail(err.reason, err, 2)
    except (ValueError, ArithmeticError) as err:
        return _fail("numerical-failure", err, 2)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
