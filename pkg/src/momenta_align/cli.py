"""Command line entry point: experiment orchestration and stable file output.

Commands
    predict       closed-form peak positions and the deviation budget
    single        1-D packet propagation table checked against the closed form
    pair-density  opening-angle density table and the radial shell profile
    sample        coincidence events plus an alignment report
    scan          width-scaling fits over radius / deltaP0, or a crossover scan
    validate      reduced-quadrature vs 6-D Monte Carlo, norm conservation

Every run writes CSV tables (17-significant-digit decimals, LF endings) and
one summary.json embedding the fully resolved configuration, so rerunning
from a summary reproduces the outputs byte for byte. Exit status: 0 success,
2 configuration or domain error, 3 resource limit, 4 validation check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from .config import RunConfig, load_config
from .correlation_stats import (alignment_report, crossover_scan, fit_scaling,
                                run_deltap0_scan, run_radius_scan, sample_events)
from .errors import ConfigError, DomainError, ResourceError
from .model import SourceSpectrum, reduced_coordinates
from .pair_amplitude import (PairAmplitudeField, evaluate_reduced, gamma_density,
                             norm_on_shells, radial_profile, uncertainty_product)
from .quadrature import MCOracleSpec, mc_oracle_6d, philox_rng
from .single_particle import (GaussianPacket1D, default_grid, gaussian_closed_form,
                              propagate_numeric, sigma_at, track_centroid_width)
from .stationary_phase import deviation_budget, predict, sql_width

_VALIDATE_STREAM = 0x517E


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def write_summary(path: str, command: str, config: dict, results, files):
    doc = {"command": command, "config": config, "results": results,
           "files": sorted(files)}
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _budget_dict(b):
    return {"diffractionAngle": b.diffraction_angle,
            "momentumAngle": b.momentum_angle,
            "crossoverRadius": b.crossover_radius,
            "dominant": b.dominant}


def _cmd_predict(cfg: RunConfig, out: str):
    kin = cfg.kinematics()
    t = cfg.data["t"]
    pred = predict(kin, t)
    budget = deviation_budget(kin, cfg.spectrum(), cfg.data["r1"])
    results = {
        "r1Peak": pred.r1_peak, "r2Peak": pred.r2_peak,
        "gammaPeak": pred.gamma_peak,
        "p1Mag": pred.p1_mag, "p2Mag": pred.p2_mag,
        "xi1": pred.xi1, "xi2": pred.xi2,
        "deviation": _budget_dict(budget),
        "sqlWidth1": sql_width(kin.m1, t),
        "sqlWidth2": sql_width(kin.m2, t),
    }
    return results, []


def _cmd_single(cfg: RunConfig, out: str):
    s = cfg.data["single"]
    packet = GaussianPacket1D(sigma0=s["sigma0"], k=s["k"], m=s["m"], r0=s["r0"])
    spec = cfg.quadrature()
    rows = []
    per_time = []
    centroids = []
    for t in s["times"]:
        grid = default_grid(packet, t, s["gridPoints"])
        psi = propagate_numeric(packet, grid, t, spec)
        exact = gaussian_closed_form(packet, grid, t)
        mean, width = track_centroid_width(grid, psi)
        centroids.append((t, mean))
        per_time.append({
            "t": t,
            "maxAbsError": float(np.max(np.abs(psi - exact))),
            "centroid": mean, "width": width,
            "predictedCentroid": packet.r0 + packet.v * t,
            "predictedWidth": sigma_at(packet, t),
        })
        rows.extend((t, x, p.real, p.imag, abs(p) ** 2)
                    for x, p in zip(grid, psi))
    results = {"times": per_time}
    if len({t for t, _ in centroids}) >= 2:
        slope = np.polyfit([t for t, _ in centroids],
                           [c for _, c in centroids], 1)[0]
        results["centroidSlope"] = float(slope)
        results["expectedSlope"] = packet.v
    path = os.path.join(out, "single.csv")
    write_csv(path, ("t", "x", "re_psi", "im_psi", "density"), rows)
    return results, ["single.csv"]


def _cmd_pair_density(cfg: RunConfig, out: str):
    field = cfg.field()
    t = cfg.data["t"]
    table = gamma_density(field, cfg.data["r1"], cfg.data["r2"], t,
                          cfg.data["gammaGridCells"])
    profile = radial_profile(field, t, n_points=cfg.data["radialPoints"])
    write_csv(os.path.join(out, "gamma_density.csv"), ("gamma", "density"),
              zip(table.gamma, table.density))
    write_csv(os.path.join(out, "radial.csv"), ("r", "density"),
              zip(profile.r, profile.density))
    results = {
        "modeGamma": table.mode_gamma,
        "modeGammaShape": table.mode_gamma_shape,
        "widthAboutPi": table.width_about_pi(),
        "normalization": table.normalization,
        "radialPeak": profile.peak_r,
        "radialPeakPrediction": 0.5 * field.kin.relative_speed * t,
    }
    return results, ["gamma_density.csv", "radial.csv"]


def _report_dict(report):
    return {"sigmaEpsilon": report.sigma_epsilon, "sigmaErr": report.sigma_err,
            "radialPeak1": report.radial_peak1, "radialPeak2": report.radial_peak2,
            "eventCount": report.event_count}


def _cmd_sample(cfg: RunConfig, out: str):
    field = cfg.field()
    seed = cfg.require_seed()
    events = sample_events(field, cfg.data["t"], cfg.data["sampleCount"], seed,
                           n_radial=cfg.data["samplerRadialCells"],
                           n_gamma=cfg.data["samplerGammaCells"])
    report = alignment_report(events, seed=seed)
    write_csv(os.path.join(out, "events.csv"),
              ("r1", "theta1", "phi1", "r2", "theta2", "phi2", "gamma"),
              zip(events.r1, events.theta1, events.phi1,
                  events.r2, events.theta2, events.phi2, events.gamma))
    results = {"report": _report_dict(report)}
    results["uncertaintyProduct"] = (uncertainty_product(field, events)
                                     if len(events) >= 10_000 else None)
    return results, ["events.csv"]


def _cmd_scan(cfg: RunConfig, out: str):
    scan = cfg.data["scan"]
    if scan is None:
        raise ConfigError("the scan command needs a 'scan' section")
    kin = cfg.kinematics()
    seed = cfg.require_seed()
    kwargs = dict(count=cfg.data["sampleCount"], seed=seed,
                  delta_e=cfg.data["deltaE"], quad=cfg.quadrature(),
                  n_radial=cfg.data["samplerRadialCells"],
                  n_gamma=cfg.data["samplerGammaCells"])
    if scan["variable"] == "crossover":
        result = crossover_scan(kin, cfg.data["deltaP0"],
                                radii=scan["values"], **kwargs)
        write_csv(os.path.join(out, "scan.csv"),
                  ("abscissa", "sigma_epsilon", "sigma_err"),
                  ((r, s, e) for r, s, e, _ in result.rows))
        results = {
            "empiricalCrossover": result.empirical_crossover,
            "predictedCrossover": result.predicted_crossover,
            "withinFactor3": result.within_factor3,
            "localSlopes": [{"r": float(r), "slope": float(s)}
                            for r, s in zip(result.slope_midpoints, result.slopes)],
            "dominant": [d for _, _, _, d in result.rows],
        }
        return results, ["scan.csv"]

    if scan["values"] is None:
        raise ConfigError("scan.values is required for radius and deltaP0 scans")
    if scan["variable"] == "radius":
        points = run_radius_scan(kin, cfg.data["deltaP0"], scan["values"], **kwargs)
    else:
        points = run_deltap0_scan(kin, scan["radius"], scan["values"], **kwargs)
    fit = fit_scaling(points, scan["variable"])
    write_csv(os.path.join(out, "scan.csv"),
              ("abscissa", "sigma_epsilon", "sigma_err"),
              ((p.abscissa, p.sigma_epsilon, p.sigma_err) for p in points))
    results = {
        "exponent": fit.exponent, "exponentErr": fit.exponent_err,
        "points": [{"abscissa": p.abscissa, "sigmaEpsilon": p.sigma_epsilon,
                    "sigmaErr": p.sigma_err, "budget": _budget_dict(p.budget)}
                   for p in points],
    }
    return results, ["scan.csv"]


def _random_direction(rng):
    u = rng.uniform(-1.0, 1.0)
    az = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(max(0.0, 1.0 - u * u))
    return np.array([s * math.cos(az), s * math.sin(az), u])


def _cmd_validate(cfg: RunConfig, out: str):
    mc_spec = cfg.mc_spec()
    val = cfg.data["validate"]
    quad = cfg.quadrature()
    rng = philox_rng(mc_spec.seed, stream=_VALIDATE_STREAM)

    reduction = []
    all_ok = True
    for i in range(val["configCount"]):
        from .model import make_kinematics  # local alias keeps header tidy
        kin = make_kinematics(rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6),
                              rng.uniform(0.6, 1.5))
        spectrum = SourceSpectrum(delta_p0=rng.uniform(0.05, 0.2), E0=kin.E0,
                                  delta_e=0.05 * kin.E0,
                                  amplitude=cfg.data["amplitude"])
        field = PairAmplitudeField(spectrum=spectrum, kin=kin, quad=quad)
        t = rng.uniform(8.0, 25.0)
        d1 = _random_direction(rng)
        gamma = math.pi - rng.uniform(0.0, 0.4)
        helper = np.array([0.0, 0.0, 1.0]) if abs(d1[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = np.cross(helper, d1)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(d1, e1)
        az = rng.uniform(0.0, 2.0 * math.pi)
        d2 = (math.cos(gamma) * d1
              + math.sin(gamma) * (math.cos(az) * e1 + math.sin(az) * e2))
        r1 = kin.v1 * t * rng.uniform(0.9, 1.1) * d1
        r2 = kin.v2 * t * rng.uniform(0.9, 1.1) * d2

        red = reduced_coordinates(r1, r2, kin)
        q = evaluate_reduced(field, red.rw, red.rho, t)
        m = mc_oracle_6d(spectrum, kin, r1, r2, t, mc_spec)
        combined = math.sqrt(m.std_error ** 2 + q.error ** 2)
        distance = abs(q.value - m.value)
        ok = distance <= 3.0 * combined
        all_ok = all_ok and ok
        reduction.append({
            "config": i, "t": t, "gamma": gamma,
            "quadReal": q.value.real, "quadImag": q.value.imag,
            "mcReal": m.value.real, "mcImag": m.value.imag,
            "mcStdError": m.std_error, "quadError": q.error,
            "sigmas": distance / combined if combined > 0 else 0.0,
            "ok": ok,
        })

    field = cfg.field()
    norms = [norm_on_shells(field, t) for t in val["normTimes"]]
    ratios = [n / norms[0] for n in norms]
    norm_ok = all(abs(r - 1.0) <= val["normTolerance"] for r in ratios)
    all_ok = all_ok and norm_ok

    results = {
        "reduction": reduction,
        "norm": {"times": val["normTimes"], "values": norms, "ratios": ratios,
                 "ok": norm_ok},
        "passed": all_ok,
    }
    return results, []


_COMMANDS = {
    "predict": _cmd_predict,
    "single": _cmd_single,
    "pair-density": _cmd_pair_density,
    "sample": _cmd_sample,
    "scan": _cmd_scan,
    "validate": _cmd_validate,
}

_HINTS = {
    "gamma_density.csv": "plot 'gamma_density.csv' using 1:2 with lines title 'density(gamma)'",
    "radial.csv": "plot 'radial.csv' using 1:2 with lines title 'shell profile'",
    "events.csv": "set datafile separator ','; plot 'events.csv' every ::1 using 7:(1) smooth freq",
    "scan.csv": "set logscale xy; plot 'scan.csv' using 1:2:3 with yerrorlines",
    "single.csv": "plot 'single.csv' using 2:5 with lines title '|psi|^2'",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="momenta-align",
        description="Two-fragment decay simulator and anti-alignment analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seeds")
        p.add_argument("--threads", type=int, default=os.cpu_count(),
                       help="worker budget; outputs never depend on it")
        p.add_argument("--gnuplot-hints", action="store_true",
                       help="print plotting recipes for the written files")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg.data["seed"] = args.seed
            cfg.data["mcOracle"]["seed"] = args.seed
        os.makedirs(args.out, exist_ok=True)
        results, files = _COMMANDS[args.command](cfg, args.out)
        write_summary(os.path.join(args.out, "summary.json"), args.command,
                      cfg.data, results, files)
        files = files + ["summary.json"]
        if args.gnuplot_hints:
            print("# gnuplot recipes")
            for name in files:
                if name in _HINTS:
                    print(_HINTS[name])
        failed = args.command == "validate" and not results["passed"]
        print(f"{args.command}: {'FAILED CHECKS' if failed else 'ok'} "
              f"({', '.join(files)})")
        return 4 if failed else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
