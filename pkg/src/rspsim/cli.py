"""Command-line driver: ``rspsim {prepare,bounds,tomo,distill}``.

Exit codes: 0 success, 2 bad input (config, count file, arguments),
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, bounds, qstate, tomo
from .config import ConfigError, RunConfig, load_config
from .errors import ConvergenceError, StateError
from .rsp import predict_rpq

log = logging.getLogger("rspsim")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 2, 3


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _num(x: float):
    # JSON has no NaN
    return None if x is None or np.isnan(x) else float(x)


def _settings_json(s) -> dict:
    return {
        "qwp_deg": float(np.rad2deg(s.qwp_angle)),
        "hwp_deg": float(np.rad2deg(s.hwp_angle)),
        "t_d": s.t_d,
        "t_a": s.t_a,
        "predicted_fidelity": _num(s.predicted_fidelity),
        "success_probability": _num(s.success_probability),
    }


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("rspsim-out")


def cmd_prepare(cfg: RunConfig, out: Path) -> dict:
    """Run every target (and every fixed setting) through the simulated experiment."""
    if not cfg.targets and not cfg.settings:
        raise ConfigError("prepare needs at least one entry under targets, target_set or settings")
    seeds = tomo.child_seeds(cfg.seed, 1 + len(cfg.targets) + len(cfg.settings))
    resource = tomo.characterize_resource(cfg.resource, cfg.n0, seeds[0])
    rows = []
    for (tid, target), seed in zip(cfg.targets, seeds[1:]):
        try:
            run = tomo.run_target(resource, target, cfg.n0, seed, cfg.retardances)
        except ConvergenceError as exc:
            raise ConvergenceError(f"target {tid}: {exc}", best=exc.best) from exc
        except ValueError as exc:
            raise type(exc)(f"target {tid}: {exc}") from exc
        rows.append((tid, target, run.settings, run.expected, run.tomography, run.fidelity, run.counts))

    # fixed settings: predict from the reconstructed source, measure on the true one
    for (sid, s), seed in zip(cfg.settings, seeds[1 + len(cfg.targets) :]):
        try:
            expected, p = predict_rpq(resource.tomography.rho_hat, s, cfg.retardances)
            actual, _ = predict_rpq(resource.truth, s, cfg.retardances)
        except ValueError as exc:
            raise type(exc)(f"settings {sid}: {exc}") from exc
        counts = tomo.simulate_counts(actual, tomo.PROJECTORS_1Q, cfg.n0, seed)
        result = tomo.mle_reconstruct(counts)
        s = replace(s, success_probability=p)
        rows.append((sid, None, s, expected, result, qstate.fidelity(expected, result.rho_hat), counts))

    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "counts" / "resource.json", resource.counts.to_json())
    _write_json(out / "states" / "resource.json", resource.tomography.to_json())
    table = []
    with open(out / "bloch.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["target_id", "s1", "s2", "s3", "purity", "fidelity"])
        for tid, target, s, expected, result, fid, counts in rows:
            qstate.validate(expected)
            qstate.validate(result.rho_hat)
            bloch = qstate.bloch_from_state(result.rho_hat)
            pur = qstate.purity(result.rho_hat)
            writer.writerow([tid, *(_fmt(x) for x in bloch), _fmt(pur), _fmt(fid)])
            _write_json(out / "counts" / f"{tid}.json", counts.to_json())
            state = {
                "id": tid,
                "settings": _settings_json(s),
                "expected": qstate.matrix_to_json(expected),
                "expected_bloch": qstate.bloch_to_json(qstate.bloch_from_state(expected)),
                "reconstructed": result.to_json(),
                "fidelity": fid,
            }
            if target is not None:
                state["target"] = {
                    "theta_deg": float(np.rad2deg(target.theta)),
                    "phi_deg": float(np.rad2deg(target.phi)),
                    "lam": target.lam,
                    "bloch": qstate.bloch_to_json(target.bloch()),
                }
            _write_json(out / "states" / f"{tid}.json", state)
            table.append(
                {
                    "id": tid,
                    "fidelity": fid,
                    "purity": pur,
                    "predicted_fidelity": _num(s.predicted_fidelity),
                    "success_probability": _num(s.success_probability),
                }
            )
    fids = [r["fidelity"] for r in table]
    manifest = {
        "tool": "rspsim",
        "version": __version__,
        "command": "prepare",
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "n0": cfg.n0,
        "retardances_deg": [float(np.rad2deg(d)) for d in cfg.retardances],
        "resource_fidelity": qstate.fidelity(resource.truth, resource.tomography.rho_hat),
        "resource_tangle": qstate.tangle(resource.tomography.rho_hat),
        "targets": table,
        "mean_fidelity": float(np.mean(fids)),
        "min_fidelity": float(np.min(fids)),
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def cmd_bounds(cfg: RunConfig, out: Path, samples: int | None = None) -> dict:
    if cfg.tetra is None and cfg.matrix is None:
        raise ConfigError("bounds needs a bounds.tetra or bounds.matrix entry")
    n = samples or cfg.samples
    t = cfg.tetra
    resource = bounds.tetra_state(t) if t is not None else cfg.matrix
    cloud = bounds.monte_carlo_preparable(resource, n, cfg.seed, tetra=t)
    report = {
        "tool": "rspsim",
        "version": __version__,
        "command": "bounds",
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "samples": n,
        "monte_carlo": cloud.summary(),
        "resource_purity": qstate.purity(resource),
    }
    if t is not None:
        report.update(
            {
                "tetra": [t.t1, t.t2, t.t3],
                "eigenvalues": [float(x) for x in t.eigenvalues()],
                "entangled": bounds.is_entangled(t),
                "semi_axes": list(bounds.preparable_ellipsoid(t).semi_axes),
                "purity_AB": bounds.purity_AB(t),
                "max_purity_B": bounds.max_purity_B(t),
                "violations": cloud.violations,
            }
        )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "cloud.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s1", "s2", "s3", "success_prob"])
        for s, p in zip(cloud.points, cloud.success):
            writer.writerow([*(_fmt(x) for x in s), _fmt(p)])
    _write_json(out / "bounds.json", report)
    return report


def cmd_tomo(count_file: Path, out: Path) -> dict:
    try:
        data = json.loads(Path(count_file).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {count_file}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{count_file}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        counts = tomo.CountRecord.from_json(data)
    except ValueError as exc:
        raise ConfigError(f"{count_file}: {exc}") from None
    result = tomo.mle_reconstruct(counts)
    report = result.to_json()
    report["source"] = str(count_file)
    _write_json(out / "tomography.json", report)
    return report


def cmd_distill(p: float, out: Path) -> dict:
    m, success = bounds.distill_pure(p)
    distilled = qstate.normalize(qstate.apply_alice(bounds.pure_resource(p), m))
    report = {
        "tool": "rspsim",
        "version": __version__,
        "command": "distill",
        "p": p,
        "filter": qstate.matrix_to_json(m),
        "a": float(m[0, 0].real),
        "b": float(m[1, 1].real),
        "success_probability": success,
        "bell_fidelity": qstate.fidelity(bounds.BELL, distilled),
    }
    _write_json(out / "distill.json", report)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rspsim", description="Remote state preparation simulator")
    parser.add_argument("--version", action="version", version=f"rspsim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    common(sub.add_parser("prepare", help="simulate remote preparation plus tomography for each target"))
    b = sub.add_parser("bounds", help="preparable-state bounds and Monte Carlo cloud")
    common(b)
    b.add_argument("--samples", type=int, help="number of sampled filters")
    t = sub.add_parser("tomo", help="maximum-likelihood reconstruction of a count file")
    t.add_argument("counts", help="CountRecord JSON file")
    t.add_argument("--out", help="output directory")
    d = sub.add_parser("distill", help="Procrustean distillation of sqrt(p)|00> + sqrt(1-p)|11>")
    common(d, config_required=False)
    d.add_argument("--p", type=float, help="weight of |00> (1/2 < p < 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "tomo":
            out = Path(args.out) if args.out else Path("rspsim-out")
            cmd_tomo(Path(args.counts), out)
            return EXIT_OK
        cfg = load_config(args.config, args.seed) if args.config else None
        out = _out_dir(args, cfg)
        if args.command == "prepare":
            manifest = cmd_prepare(cfg, out)
            log.info("mean fidelity %.6f over %d states", manifest["mean_fidelity"], len(manifest["targets"]))
        elif args.command == "bounds":
            if args.samples is not None and args.samples < 1:
                raise ConfigError("--samples must be positive")
            report = cmd_bounds(cfg, out, args.samples)
            if report.get("violations"):
                log.error("%d samples fall outside the ellipsoid", report["violations"])
                return EXIT_NONCONVERGED
        elif args.command == "distill":
            p = args.p if args.p is not None else (cfg.distill_p if cfg else None)
            if p is None:
                raise ConfigError("distill needs --p or a distill.p config entry")
            cmd_distill(p, out)
    except (ConfigError, StateError, ValueError) as exc:
        print(f"rspsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"rspsim: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
