"""``blowave <command> --config <path> [--out <dir>] [--threads N]``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .asymptotic_system import (AsymptoticData, asymptotic_profile, decay_rate_U,
                                fit_power_law)
from .blowup_diagnostics import (beta_functional, beta_inequality_margins,
                                 bernhardt_certificate, measured_support_radius)
from .config import Command, ConfigError, RunConfig, parse_config
from .linear_wave import SignCondition, SignSearch, classify_sign_condition
from .radial_fields import RadialGrid, sample_function
from .semilinear_solver import (BackwardProblemSpec, SolveStatus, constructed_solution,
                                solve_backward, solve_forward, tail_lower_bound)
from .spherical_means import radial_to_cartesian

log = logging.getLogger("blowave")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_DIVERGED = 4
EXIT_IO = 5

_STATUS_EXIT = {SolveStatus.COMPLETED: EXIT_OK, SolveStatus.BLEW_UP: EXIT_BLOWUP,
                SolveStatus.DIVERGED: EXIT_DIVERGED}


@dataclass
class ExitReport:
    code: int
    summary: str
    outputs: list = field(default_factory=list)


def _fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.paths: list[str] = []

    def write(self, name: str, text: str) -> str:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.paths.append(str(path))
        return str(path)


# -- commands ------------------------------------------------------------
def _asymptotic(cfg: RunConfig, w: _Writer) -> ExitReport:
    data = AsymptoticData.from_datum(cfg.data["A"])
    g = cfg.grid
    s_grid = np.linspace(0.0, g["s_max"], g["n_s"])
    q_grid = np.linspace(g["q_min"], g["q_max"], g["n_q"])
    prof = asymptotic_profile(data, s_grid, q_grid, step=cfg.solver["step"])
    summary = prof.summary()
    summary["data"] = cfg.data["A"].spec()
    summary["sign"] = data.sign_certificate.value
    slope = None
    if math.isinf(prof.lifespan) and prof.U.size and np.any(prof.U != 0):
        fit = decay_rate_U(data)
        slope = fit.slope
        summary["decay_fit"] = fit.to_dict()
    w.write("profile.csv", prof.to_csv())
    w.write("summary.json", _json(summary))
    return ExitReport(EXIT_OK, f"asymptotic: lifespan={_fmt(prof.lifespan)} "
                               f"decay_slope={_fmt(slope)}", w.paths)


def _forward_run(cfg: RunConfig):
    u0d, u1d = cfg.data["u0"], cfg.data["u1"]
    t_max = cfg.solver["t_max"]
    r_max = cfg.grid["r_max"]
    if r_max is None:
        sup = max(u0d.support_radius, u1d.support_radius)
        if math.isinf(sup):
            raise ConfigError(["[grid] r_max is required for data without compact support"])
        r_max = sup + t_max + 1.0
    grid = RadialGrid.from_spacing(r_max, cfg.grid["h"])
    u0, u1 = sample_function(u0d, grid), sample_function(u1d, grid)
    try:
        out = solve_forward(u0, u1, t_max, cfg.cfl, cfg.solver["blowup_threshold"],
                            lagged=cfg.solver["source"] == "lagged",
                            domain_of_dependence=cfg.solver["domain_of_dependence"])
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    return out


def _sign_search(cfg: RunConfig) -> SignSearch:
    base = SignSearch.default(r_max=cfg.solver["search_r_max"])
    n = cfg.output["n_random_x0"]
    if n:
        rng = np.random.default_rng(cfg.output["seed"])
        extra = rng.uniform(-2.0, 2.0, size=(n, 3))
        base = replace(base, x0_candidates=tuple(base.x0_candidates) + tuple(map(tuple, extra)))
    return base


def _signcheck_report(cfg: RunConfig):
    f0 = radial_to_cartesian(cfg.data["u0"])
    f1 = radial_to_cartesian(cfg.data["u1"])
    return classify_sign_condition(f0, f1, _sign_search(cfg))


def _write_forward(cfg: RunConfig, out, w: _Writer) -> None:
    w.write("summary.json", _json(out.summary()))
    w.write("energy.csv", out.energy_csv())
    w.write("max_dtu.csv", out.max_dtu_csv())
    if cfg.output["field_csv"]:
        w.write("field.csv", out.field.to_csv(cfg.output["decimate"]))


def _certificate(cfg: RunConfig, out, w: _Writer):
    rep = _signcheck_report(cfg)
    w.write("signcheck.json", rep.to_json())
    wit = rep.witnesses.get(SignCondition.FORWARD_POSITIVE)
    if wit is None:
        return None
    cert, tr = bernhardt_certificate(out.field, wit.x0, wit.q, wit.r0,
                                     wit.q + (out.field.t_end - out.field.t_start))
    w.write("n_functional.csv", tr.to_csv("r,N"))
    return w.write("certificate.json", cert.to_json()), cert


def _forward(cfg: RunConfig, w: _Writer) -> ExitReport:
    out = _forward_run(cfg)
    _write_forward(cfg, out, w)
    line = f"forward: status={out.status.value}"
    if out.status is SolveStatus.BLEW_UP:
        b = out.blowup
        line += f" t_blow={_fmt(b.t_blow)} r_blow={_fmt(b.r_blow)} blow-up detected"
        got = _certificate(cfg, out, w)
        line += f" certificate={got[0]}" if got else " certificate=none"
    return ExitReport(_STATUS_EXIT[out.status], line, w.paths)


def _diagnose(cfg: RunConfig, w: _Writer) -> ExitReport:
    out = _forward_run(cfg)
    _write_forward(cfg, out, w)
    grid = out.field.grid
    R = max(measured_support_radius(sample_function(cfg.data["u0"], grid).values, grid.r),
            measured_support_radius(sample_function(cfg.data["u1"], grid).values, grid.r))
    q = cfg.solver["q_beta"] if cfg.solver["q_beta"] is not None else -(R + 1.0)
    rho = np.linspace(-q, -q + out.field.t_end, 200)
    tr = beta_functional(out.field, q, rho)
    w.write("beta.csv", tr.to_csv("rho,beta"))
    # the run may end before reaching the characteristic; then beta has no samples
    extra = {"q_beta": q, "R": R, "beta_truncated": tr.truncated, "beta_samples": int(tr.x.size),
             "beta_min_margin": None}
    if tr.x.size >= 5:
        extra["beta_min_margin"] = float(beta_inequality_margins(tr, R, q).min())
    got = _certificate(cfg, out, w)
    if got:
        extra["certificate"] = got[1].to_dict()
    w.write("diagnostics.json", _json(extra))
    line = (f"diagnose: status={out.status.value} beta_min_margin="
            f"{_fmt(extra.get('beta_min_margin'))} certificate={got[0] if got else 'none'}")
    return ExitReport(_STATUS_EXIT[out.status], line, w.paths)


def _backward_spec(cfg: RunConfig, epsilon=None) -> BackwardProblemSpec:
    s = cfg.solver
    return BackwardProblemSpec(AsymptoticData.from_datum(cfg.data["A"]),
                               epsilon=s["epsilon"] if epsilon is None else epsilon,
                               delta=s["delta"], T=s["T"], h=cfg.grid["h"], cfl=cfg.cfl,
                               margin=s["margin"], r_max=cfg.grid["r_max"],
                               store_dt=s["store_dt"], step=s["step"],
                               blowup_threshold=s["blowup_threshold"],
                               lagged=s["source"] == "lagged")


def _energy_exponent(out, T: float):
    et = out.energy_trace
    m = (et[:, 0] >= 5.0) & (et[:, 0] <= T) & (et[:, 1] > 0)
    if m.sum() < 3:
        return None
    return fit_power_law(1 + et[m, 0], np.sqrt(et[m, 1]))[0]


def _backward_once(cfg: RunConfig, w: _Writer, epsilon=None) -> tuple:
    try:
        spec = _backward_spec(cfg, epsilon)
        out = solve_backward(spec)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    summary = out.summary()
    expo = _energy_exponent(out, spec.T)
    summary["energy_sqrt_exponent"] = expo
    summary["data"] = cfg.data["A"].spec()
    w.write("energy.csv", out.energy_csv())
    if out.status is SolveStatus.COMPLETED:
        u, ut = constructed_solution(out, spec, 0.0)
        R = spec.data.support_radius if spec.data.compact else 0.0
        summary["tail_bound"] = tail_lower_bound(u, R + 1.0, u.grid.r_max / 2).to_dict()
        rows = ["r,u,u_t"] + [f"{a!r},{b!r},{c!r}" for a, b, c in
                              zip(u.r.tolist(), u.values.tolist(), ut.values.tolist())]
        w.write("slice_t0.csv", "\n".join(rows) + "\n")
    w.write("summary.json", _json(summary))
    if cfg.output["field_csv"]:
        w.write("field.csv", out.field.to_csv(cfg.output["decimate"]))
    e0 = float(out.energy_trace[0, 1]) if len(out.energy_trace) else None
    return out, expo, e0


def _backward(cfg: RunConfig, w: _Writer) -> ExitReport:
    out, expo, e0 = _backward_once(cfg, w)
    line = f"backward: status={out.status.value} energy_sqrt_exponent={_fmt(expo)} E(0)={_fmt(e0)}"
    if out.status is SolveStatus.BLEW_UP:
        line += f" t_blow={_fmt(out.blowup.t_blow)}"
    return ExitReport(_STATUS_EXIT[out.status], line, w.paths)


def _sweep_job(args):
    text, eps, out_dir = args
    cfg = parse_config(text)
    w = _Writer(Path(out_dir))
    out, expo, e0 = _backward_once(cfg, w, eps)
    return out.status.value, expo, e0, w.paths


def _sweep(cfg: RunConfig, w: _Writer, threads: int) -> ExitReport:
    text = cfg.to_text()
    jobs = [(text, eps, str(w.out / f"epsilon_{eps!r}")) for eps in cfg.solver["sweep_epsilon"]]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = ["epsilon,status,energy_sqrt_exponent,energy_t0"]
    lines, codes = [], []
    for (_, eps, _), (status, expo, e0, paths) in zip(jobs, results):
        rows.append(f"{eps!r},{status},{'' if expo is None else repr(expo)},"
                    f"{'' if e0 is None else repr(e0)}")
        lines.append(f"  epsilon={eps!r}: status={status} energy_sqrt_exponent={_fmt(expo)}")
        codes.append(_STATUS_EXIT[SolveStatus(status)])
        w.paths.extend(paths)
    w.write("sweep.csv", "\n".join(rows) + "\n")
    code = EXIT_DIVERGED if EXIT_DIVERGED in codes else (EXIT_BLOWUP if EXIT_BLOWUP in codes else EXIT_OK)
    return ExitReport(code, f"sweep: {len(jobs)} backward runs\n" + "\n".join(lines), w.paths)


def _signcheck(cfg: RunConfig, w: _Writer) -> ExitReport:
    rep = _signcheck_report(cfg)
    w.write("signcheck.json", rep.to_json())
    margin = rep.witness.margin if rep.witness else None
    return ExitReport(EXIT_OK, f"signcheck: condition={rep.condition.value} margin={_fmt(margin)}",
                      w.paths)


def run(cfg: RunConfig, out_dir="blowave_out", threads: int = 1) -> ExitReport:
    """Execute a validated config; errors become exit codes, never tracebacks."""
    w = _Writer(Path(out_dir))
    try:
        w.out.mkdir(parents=True, exist_ok=True)
        w.write("effective_config.txt", cfg.to_text())
        if cfg.command is Command.ASYMPTOTIC:
            return _asymptotic(cfg, w)
        if cfg.command is Command.FORWARD:
            return _forward(cfg, w)
        if cfg.command is Command.DIAGNOSE:
            return _diagnose(cfg, w)
        if cfg.command is Command.BACKWARD:
            return _backward(cfg, w)
        if cfg.command is Command.SWEEP:
            return _sweep(cfg, w, threads)
        return _signcheck(cfg, w)
    except ConfigError as exc:
        return ExitReport(EXIT_CONFIG, "config error: " + "; ".join(exc.errors), w.paths)
    except OSError as exc:
        where = getattr(exc, "filename", None) or out_dir
        return ExitReport(EXIT_IO, f"I/O error at {where}: {exc.strerror or exc}", w.paths)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="blowave", description=__doc__)
    p.add_argument("command", choices=[c.value for c in Command])
    p.add_argument("--config", required=True, help="path to the run configuration")
    p.add_argument("--out", default="blowave_out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"I/O error at {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, command=args.command)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rep = run(cfg, args.out, args.threads)
    print(rep.summary)
    return rep.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
