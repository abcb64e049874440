"""Command-line driver.

Subcommands::

    run         --config PATH
    picard      --config PATH
    convergence --config PATH --levels N
    diagnose    --snapshots GLOB --out CSV

Exit codes: 0 success, 1 usage or invalid configuration, 2 numerical failure
(blow-up, Picard divergence), 3 I/O failure.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, load_config, make_initial_data
from .diagnostics import charge, growth_fit, lorentz_l2t_l1, record, running_sup
from .formats import (FormatError, TimeseriesWriter, read_snapshot, snapshot_path,
                      write_snapshot, write_timeseries)
from .integrators import evolve, picard_solve
from .physics import PhysParams

log = logging.getLogger("nlms")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nlms", description="Periodic Maxwell-Schroedinger solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evolve the configured initial data")
    r.add_argument("--config", required=True)

    pc = sub.add_parser("picard", help="iterate the Duhamel solution map")
    pc.add_argument("--config", required=True)

    cv = sub.add_parser("convergence", help="dt-refinement study")
    cv.add_argument("--config", required=True)
    cv.add_argument("--levels", type=int, default=2)

    dg = sub.add_parser("diagnose", help="diagnostics for stored snapshots")
    dg.add_argument("--snapshots", required=True, help="glob pattern of snapshot files")
    dg.add_argument("--out", required=True)
    dg.add_argument("--gamma", type=float, default=None,
                    help="override the exponent stored in the snapshot header")
    dg.add_argument("--sigma", type=float, default=4.0 / 3.0)
    dg.add_argument("--no-dealias", action="store_true")
    return ap


def _output_dir(cfg) -> Path:
    out = Path(cfg.io.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, allow_nan=True)
        fh.write("\n")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    grid, p = cfg.make_grid(), cfg.params()
    s0 = make_initial_data(cfg.init, grid, cfg.run.dealias)
    out = _output_dir(cfg)
    count = 0

    with TimeseriesWriter(out / cfg.io.csv_path) as csv_out:
        def on_sample(s, rec):
            nonlocal count
            write_snapshot(s, snapshot_path(out, cfg.io.snapshot_prefix, count), p.gamma)
            count += 1
            if rec is not None:
                csv_out.write(rec)

        traj = evolve(s0, p, cfg.run.dt, cfg.run.T, cfg.run.integrator,
                      cfg.run.snapshot_every, cfg.run.dealias, cfg.run.diagnostics,
                      store_states=False, on_sample=on_sample)

    summary = dict(traj.meta, samples=count, blowup_time=traj.blowup_time)
    if len(traj.diagnostics) >= 2:
        summary["lorentz_l2t_l1"] = lorentz_l2t_l1(traj)
    if len(traj.diagnostics) >= 4:
        sup = running_sup([r.m_norm for r in traj.diagnostics])
        if sup[0] > 0:
            fit = growth_fit(list(zip(traj.times, sup)))
            summary["growth_fit"] = {
                "poly_exponent": fit.poly_exponent, "exp_rate": fit.exp_rate,
                "poly_rms": fit.residuals["poly_rms"], "exp_rms": fit.residuals["exp_rms"]}
    _write_json(out / "run_summary.json", summary)
    log.info("wrote %d snapshots to %s", count, out)
    if traj.blowup_time is not None:
        print(f"blow-up signalled at t={traj.blowup_time:.6g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_picard(args) -> int:
    cfg = load_config(args.config)
    grid, p = cfg.make_grid(), cfg.params()
    s0 = make_initial_data(cfg.init, grid, cfg.run.dealias)
    pc = cfg.picard
    traj, rep = picard_solve(grid, (s0.u, s0.A, s0.At), p, pc.T, samples=pc.samples,
                             tol=pc.tol, max_iter=pc.max_iter, substeps=pc.substeps,
                             dealias=cfg.run.dealias)
    out = _output_dir(cfg)
    report = rep.as_dict() | {"T": pc.T, "samples": pc.samples, "substeps": pc.substeps,
                              "tol": pc.tol}
    _write_json(out / "picard_report.json", report)
    if cfg.run.diagnostics:
        write_timeseries([record(s, p, cfg.run.dealias) for s in traj.samples],
                         out / ("picard_" + cfg.io.csv_path))
    print(f"iterates={rep.iterates} converged={rep.converged} "
          f"last_d={rep.d_distances[-1]:.3e}")
    if not rep.converged:
        print("Picard iteration did not converge"
              + (" (contraction failure)" if rep.diverged else ""), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_convergence(args) -> int:
    from .studies import cadence_study, conservation_study, self_convergence

    if args.levels < 2:
        raise _UsageError("--levels must be >= 2")
    cfg = load_config(args.config)
    grid, p = cfg.make_grid(), cfg.params()
    s0 = make_initial_data(cfg.init, grid, cfg.run.dealias)
    dt, T = cfg.run.dt, cfg.run.T
    if T <= 0:
        raise _UsageError("convergence needs run.T > 0")
    report: dict = {"dt": dt, "T": T, "levels": args.levels}
    for name in ("rk4", "splitting"):
        sc = self_convergence(s0, p, name, dt, T, args.levels, cfg.run.dealias)
        report[name] = sc.as_dict()
        print(f"{name}: fitted order {sc.order:.3f}")

    dts = [dt / 2**j for j in range(args.levels + 1)]
    probe = dt * max(1, round(0.5 * T / dt))
    if p.gamma > 2 and probe + dt <= T and charge(grid, s0.u) > 0:
        cs = conservation_study(s0, p, dts, T, sample_every=dt, probe_times=[probe],
                                dealias=cfg.run.dealias)
        report["conservation"] = cs.as_dict()
        print(f"charge drift order {cs.charge_order:.3f}, energy drift order "
              f"{cs.energy_order:.3f}, E2 identity residual order {cs.e2_order:.3f}")
    else:
        report["conservation"] = None
        print("E2 identity study skipped (needs gamma > 2 and nonzero u)")
    report["cadence"] = cadence_study(s0, p, dts[-1], T, cfg.run.integrator,
                                      dealias=cfg.run.dealias)
    _write_json(_output_dir(cfg) / "convergence.json", report)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    paths = sorted(glob.glob(args.snapshots))
    if not paths:
        print(f"no snapshot matches {args.snapshots!r}", file=sys.stderr)
        return EXIT_IO
    states = []
    for path in paths:
        s, hdr = read_snapshot(path)
        gamma = args.gamma if args.gamma is not None else hdr["gamma"]
        if not (isinstance(gamma, float) and math.isfinite(gamma)):
            raise _UsageError(f"{path}: header carries no exponent; pass --gamma")
        states.append((s, gamma))
    states.sort(key=lambda x: x[0].t)
    recs = [record(s, PhysParams(g, args.sigma), not args.no_dealias) for s, g in states]
    write_timeseries(recs, args.out)
    print(f"wrote {len(recs)} records to {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "picard": cmd_picard, "convergence": cmd_convergence,
            "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"nlms: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"nlms: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
