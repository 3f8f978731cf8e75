"""Command-line scenario runner.

    noninertial run CONFIG [CONFIG ...] [--frozen-cm] [--order {0,1}] [--out DIR]
                    [--format {csv,json}] [--seed N] [--quiet] [--jobs N] [--plot]
    noninertial run --identity-suite-only [--cases FILE] [--out DIR]

Every run writes ``<name>.csv`` (or ``<name>.curves.json``) with the
visibility curve and ``<name>.report.json`` (schema ``scenario-report/1``).
Exit codes: 0 pass, 2 configuration error, 3 physics-check failure,
4 numerical abort.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import factory, opalg
from .dynamics import DynamicsResult, frozen_phases, frozen_visibility, run_branches
from .ehrenfest import EhrenfestReport, residual_report, symbolic_acceleration, tuned_classical_support
from .hilbert import BindingError, PropagationAbort, SupportError, build_model, thermal_nmax, thermal_weights
from .opexpr import ConfigError, ScenarioConfig, config_dict, dump_scenario, parse_scenario, with_overrides

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_ABORT = 4

REPORT_SCHEMA = "scenario-report/1"
CSV_COLUMNS = ("t", "X", "P", "VarX", "Hrel0", "V", "norm_defect")
UNITARITY_TOL = 1e-9
VISIBILITY_TOL = 1e-3
SUPPORT_ACCEL_TOL = 1e-3


@dataclass
class Simulation:
    """Numbers produced by one scenario, before anything is written."""

    config: ScenarioConfig
    columns: dict[str, np.ndarray]
    weights: np.ndarray
    ehrenfest: EhrenfestReport | None
    bindings: dict
    stats: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _steps(cfg: ScenarioConfig) -> int:
    return max(1, round(cfg.t_max / cfg.dt))


def _weights(cfg: ScenarioConfig) -> np.ndarray:
    nbar = float(cfg.nbar)
    n_max = cfg.n_max if cfg.n_max is not None else thermal_nmax(nbar, float(cfg.thermal_tail))
    if n_max >= cfg.D_int:
        raise ConfigError(f"thermal ensemble needs n_max = {n_max} < D_int = {cfg.D_int}; "
                          f"raise D_int or thermal_tail")
    try:
        return thermal_weights(nbar, n_max, float(cfg.thermal_tail))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def scenario_series(cfg: ScenarioConfig) -> opalg.OperatorSeries:
    table = opalg.cm_table(1, order=cfg.order)
    return factory.scenario_hamiltonian(cfg.tag, cfg.order, cfg.support, cfg.curvature, table=table)


def simulate(cfg: ScenarioConfig) -> Simulation:
    """Run one scenario; raises ConfigError, BindingError, SupportError or PropagationAbort."""
    start = time.perf_counter()
    weights = _weights(cfg)
    model = build_model(cfg)
    H = scenario_series(cfg)
    dt = float(cfg.dt)
    steps = _steps(cfg)
    x_up = float(cfg.center + cfg.dx / 2)
    x_down = float(cfg.center - cfg.dx / 2)
    checks = [{"name": "bindings", "passed": model.validation.passed}]
    rep = None
    if cfg.frozen_cm:
        times = np.arange(steps + 1) * dt
        V = frozen_visibility(H, model, weights, x_up, x_down, times)
        n = len(weights)
        hrel0 = float(weights @ model.internal_energy(np.arange(n)))
        sigma = float(cfg.width) if cfg.width is not None else model.sigma0
        columns = {"t": times, "X": np.full_like(times, float(cfg.center)),
                   "P": np.full_like(times, float(cfg.momentum)), "VarX": np.full_like(times, sigma**2 / 2),
                   "Hrel0": np.full_like(times, hrel0), "V": V, "norm_defect": np.zeros_like(times)}
        extra_stats = {"phase_spread": float(np.ptp(frozen_phases(H, model, n, x_up, x_down)))}
    else:
        control = None
        if cfg.support == "classical_tuned":
            def control(t, mo):
                return {"u1": tuned_classical_support(mo, model.M, model.g)}
        res: DynamicsResult = run_branches(
            H, model, weights, center=float(cfg.center), dx=float(cfg.dx),
            width=None if cfg.width is None else float(cfg.width), momentum=float(cfg.momentum),
            dt=dt, steps=steps, krylov_dim=cfg.krylov_dim, tol=float(cfg.tol), trap=cfg.trap,
            control=control, extra={"acc": symbolic_acceleration(H, cfg.order)}, max_defect=UNITARITY_TOL)
        columns = res.columns()
        rep = residual_report(res.times, res.x_mean, res.extra["acc"], dt, cfg.tag)
        checks.append({"name": "unitarity", "value": float(res.norm_defect.max()), "tol": UNITARITY_TOL,
                       "passed": bool(res.norm_defect.max() <= UNITARITY_TOL)})
        checks.append({"name": "ehrenfest", "value": rep.max_residual, "tol": rep.tol + rep.allowance,
                       "passed": rep.passed})
        if cfg.tag == "d" and cfg.support == "quantum_operator" and rep.numeric.size:
            bound = SUPPORT_ACCEL_TOL * float(cfg.g)
            worst = float(np.max(np.abs(rep.numeric)))
            checks.append({"name": "supported_acceleration", "value": worst, "tol": bound,
                           "passed": worst <= bound})
        extra_stats = {"hermitian_defect": res.hermitian_defect, "frame_force": res.force}
        if res.control:
            extra_stats["u1_range"] = [float(res.control["u1"].min()), float(res.control["u1"].max())]
    if cfg.tag == "d" and cfg.support == "quantum_operator":
        vmin = float(columns["V"].min())
        checks.append({"name": "visibility_preserved", "value": vmin, "tol": 1 - VISIBILITY_TOL,
                       "passed": vmin >= 1 - VISIBILITY_TOL})
    keep = np.arange(0, steps + 1, cfg.record_every)
    columns = {k: np.asarray(v)[keep] for k, v in columns.items()}
    stats = {"steps": steps, "records": int(keep.size), "levels": int(len(weights)),
             "dim_cm": cfg.D_cm, "dim_int": cfg.D_int,
             "V_min": float(columns["V"].min()), "V_final": float(columns["V"][-1]),
             "wall_clock_s": time.perf_counter() - start, **extra_stats}
    return Simulation(cfg, columns, weights, rep, model.validation.to_dict(), stats, checks)


def format_csv(columns: dict[str, np.ndarray]) -> str:
    """CSV text with shortest round-trip float formatting (byte-stable)."""
    lines = [",".join(CSV_COLUMNS)]
    n = len(columns["t"])
    for i in range(n):
        lines.append(",".join(repr(float(columns[k][i])) for k in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _plot(columns: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax1.plot(columns["t"], columns["V"])
    ax1.set_ylabel("V")
    ax2.plot(columns["t"], columns["X"])
    ax2.set_ylabel("<X>")
    ax2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def identity_summary(cases_path: str | None = None) -> factory.IdentityReport:
    text = None
    if cases_path is not None:
        try:
            text = Path(cases_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read case file: {exc}") from None
    try:
        cases = factory.load_cases(text)
    except factory.CaseFileError as exc:
        raise ConfigError(f"case file: {exc}") from None
    return factory.run_identity_suite(cases)


def emit_identity_report(out_path, cases_path: str | None = None) -> int:
    """Run the identity suite and write its JSON report; returns the exit code."""
    try:
        report = identity_summary(cases_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_PHYSICS


def run_scenario(cfg: ScenarioConfig, out_dir: Path, *, seed: int = 0, plot: bool = False,
                 identities: factory.IdentityReport | None = None) -> tuple[int, dict]:
    """Simulate ``cfg`` and write its curve file and report into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if identities is None:
        identities = identity_summary()
    report = {"schema": REPORT_SCHEMA, "config": config_dict(cfg), "config_text": dump_scenario(cfg),
              "seed": seed, "identity": identities.summary()}
    code = EXIT_OK
    try:
        sim = simulate(cfg)
    except (ConfigError, SupportError) as exc:
        report.update(passed=False, error={"kind": "config", "reason": str(exc)})
        code = EXIT_CONFIG
    except BindingError as exc:
        report.update(passed=False, error={"kind": "binding", "reason": str(exc)})
        code = EXIT_PHYSICS
    except PropagationAbort as exc:
        report.update(passed=False, error={"kind": "abort", "step": exc.step, "reason": exc.reason})
        code = EXIT_ABORT
    else:
        checks = [{"name": "identity_suite", "passed": identities.passed}] + sim.checks
        if cfg.format == "csv":
            curve = out_dir / f"{cfg.name}.csv"
            curve.write_text(format_csv(sim.columns), encoding="utf-8")
        else:
            curve = out_dir / f"{cfg.name}.curves.json"
            curve.write_text(json.dumps({k: [float(x) for x in sim.columns[k]] for k in CSV_COLUMNS},
                                        indent=1) + "\n", encoding="utf-8")
        if plot:
            _plot(sim.columns, out_dir / f"{cfg.name}.png")
        passed = all(c["passed"] for c in checks)
        report.update(
            bindings=sim.bindings,
            curves={"file": curve.name, "format": cfg.format, "columns": list(CSV_COLUMNS)},
            weights=[float(w) for w in sim.weights],
            ehrenfest=sim.ehrenfest.to_dict() if sim.ehrenfest else None,
            stats=sim.stats, checks=checks, passed=passed)
        code = EXIT_OK if passed else EXIT_PHYSICS
    report["exit_code"] = code
    (out_dir / f"{cfg.name}.report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")
    return code, report


def _job(path: str, overrides: dict, out_dir: str, seed: int, plot: bool) -> tuple[str, int, str]:
    try:
        cfg = parse_scenario(path)
        if overrides:
            cfg = with_overrides(cfg, **overrides)
    except ConfigError as exc:
        return path, EXIT_CONFIG, f"error: {exc}"
    code, report = run_scenario(cfg, Path(out_dir), seed=seed, plot=plot)
    if "error" in report:
        err = report["error"]
        where = f" at step {err['step']}" if "step" in err else ""
        return path, code, f"{path}: {err['kind']}{where}: {err['reason']}"
    s = report["stats"]
    status = "PASS" if report["passed"] else "FAIL"
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    extra = f" failed={','.join(failed)}" if failed else ""
    return path, code, (f"{path}: {status} tag={cfg.tag} V_min={s['V_min']:.6g} V_final={s['V_final']:.6g} "
                        f"steps={s['steps']} t={s['wall_clock_s']:.2f}s{extra}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noninertial",
                                     description="Quantum test particles seen by accelerated observers.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run scenario files")
    run.add_argument("configs", nargs="*", help="scenario .ini files")
    run.add_argument("--identity-suite-only", action="store_true",
                     help="only run the symbolic identity suite")
    run.add_argument("--cases", help="identity case file (default: shipped suite)")
    run.add_argument("--frozen-cm", action="store_true", help="pure-phase mode with the c.m. frozen")
    run.add_argument("--order", type=int, choices=(0, 1), help="override the eps truncation order")
    run.add_argument("--out", help="output directory (default: config's output.dir)")
    run.add_argument("--format", choices=("csv", "json"), help="curve file format")
    run.add_argument("--seed", type=int, default=0, help="recorded only; no sampling is done")
    run.add_argument("--quiet", action="store_true")
    run.add_argument("--jobs", type=int, default=1, help="run configs in parallel")
    run.add_argument("--plot", action="store_true", help="also save a PNG (needs matplotlib)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else print

    if args.identity_suite_only:
        out = Path(args.out or "out") / "identity-report.json"
        code = emit_identity_report(out, args.cases)
        if code != EXIT_CONFIG:
            summary = json.loads(out.read_text())["summary"]
            say(f"identity suite: {summary['passed']}/{summary['cases']} passed -> {out}")
        return code
    if not args.configs:
        print("error: no scenario files given", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.plot:
        try:
            import matplotlib  # noqa: F401
        except ImportError:
            print("error: --plot needs matplotlib (install the 'plot' extra)", file=sys.stderr)
            return EXIT_CONFIG

    overrides = {}
    if args.frozen_cm:
        overrides["frozen_cm"] = True
    if args.order is not None:
        overrides["order"] = args.order
    if args.format:
        overrides["format"] = args.format

    jobs = []
    for path in args.configs:
        try:
            base = args.out or parse_scenario(path).out_dir
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        # isolate outputs when several configs share a directory
        out_dir = Path(base) / Path(path).stem if len(args.configs) > 1 else Path(base)
        jobs.append((path, overrides, str(out_dir), args.seed, args.plot))

    if args.jobs == 1 or len(jobs) == 1:
        results = [_job(*j) for j in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job, *zip(*jobs)))

    worst = EXIT_OK
    for _, code, line in results:
        if code == EXIT_CONFIG or code == EXIT_ABORT:
            print(line, file=sys.stderr)
        else:
            say(line)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
