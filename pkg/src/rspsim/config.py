"""YAML run configuration for the command-line driver.

Every section is optional except ``seed``; unknown keys are rejected and
errors point at the offending line of the file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import qstate
from .bounds import TetrahedronState
from .optics import retardance_at
from .rsp import PrepSettings, ResourceSpec, TargetState, axis_targets


class ConfigError(ValueError):
    pass


TOP_KEYS = {"seed", "n0", "resource", "plates", "targets", "target_set", "settings", "bounds", "distill", "output"}
RESOURCE_KEYS = {"epsilon_deg", "rel_phase_deg", "white_noise"}
PLATE_KEYS = {"design_retardance_deg", "design_wavelength_nm", "operating_wavelength_nm", "measured_retardance_deg"}
TARGET_KEYS = {"theta_deg", "phi_deg", "lam", "bloch", "id"}
SETTINGS_KEYS = {"qwp_deg", "hwp_deg", "t_d", "t_a", "id"}
BOUNDS_KEYS = {"tetra", "matrix", "samples"}
DISTILL_KEYS = {"p"}
OUTPUT_KEYS = {"dir"}
DEFAULT_PLATES = {"qwp": 90.0, "hwp": 180.0}


@dataclass
class RunConfig:
    seed: int
    n0: float = 1e4
    resource: ResourceSpec = field(default_factory=ResourceSpec)
    retardances: tuple[float, float] = (np.pi / 2, np.pi)
    targets: list[tuple[str, TargetState]] = field(default_factory=list)
    settings: list[tuple[str, PrepSettings]] = field(default_factory=list)
    tetra: TetrahedronState | None = None
    matrix: np.ndarray | None = None
    samples: int = 100_000
    distill_p: float | None = None
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _line_index(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_index(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, lines: dict, source: str):
        self.lines = lines
        self.source = source

    def fail(self, path, msg):
        line = None
        p = tuple(path)
        while line is None and p is not None:
            line = self.lines.get(p)
            p = p[:-1] if p else None
        where = f"{self.source}:{line}" if line else self.source
        dotted = ".".join(str(x) for x in path) or "<root>"
        raise ConfigError(f"{where}: {dotted}: {msg}")

    def mapping(self, value, path, allowed):
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for key in value:
            if key not in allowed:
                self.fail(tuple(path) + (key,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value

    def number(self, value, path, lo=None, hi=None):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            self.fail(path, f"{value!r} outside [{lo}, {hi}]")
        return float(value)


def _plate(ctx: _Ctx, spec, path, default_deg: float) -> float:
    spec = ctx.mapping(spec, path, PLATE_KEYS)
    if "measured_retardance_deg" in spec:
        if len(spec) > 1:
            ctx.fail(path, "measured_retardance_deg excludes the wavelength fields")
        delta = np.deg2rad(ctx.number(spec["measured_retardance_deg"], path + ("measured_retardance_deg",), 0))
    else:
        design = np.deg2rad(ctx.number(spec.get("design_retardance_deg", default_deg), path + ("design_retardance_deg",), 0))
        lam0 = ctx.number(spec.get("design_wavelength_nm", 702.0), path + ("design_wavelength_nm",), 0)
        lam = ctx.number(spec.get("operating_wavelength_nm", lam0), path + ("operating_wavelength_nm",), 0)
        if lam0 <= 0 or lam <= 0:
            ctx.fail(path, "wavelengths must be positive")
        delta = retardance_at(design, lam0, lam)
    if not 0 < delta < 2 * np.pi:
        ctx.fail(path, f"retardance {np.rad2deg(delta):.3f} deg outside (0, 360)")
    return float(delta)


def parse_config(text: str, source: str = "<config>", seed_override: int | None = None) -> RunConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        raise ConfigError(f"{source}: empty configuration")
    ctx = _Ctx(_line_index(node), source)
    data = ctx.mapping(data, (), TOP_KEYS)

    if seed_override is not None:
        data["seed"] = int(seed_override)
    if "seed" not in data:
        ctx.fail((), "seed is mandatory")
    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        ctx.fail(("seed",), f"seed must be a non-negative integer, got {seed!r}")
    cfg = RunConfig(seed=seed, raw=data)

    if "n0" in data:
        cfg.n0 = ctx.number(data["n0"], ("n0",), 0)
        if cfg.n0 <= 0:
            ctx.fail(("n0",), "n0 must be positive")

    if "resource" in data:
        r = ctx.mapping(data["resource"], ("resource",), RESOURCE_KEYS)
        cfg.resource = ResourceSpec(
            epsilon=np.deg2rad(ctx.number(r.get("epsilon_deg", 45.0), ("resource", "epsilon_deg"))),
            rel_phase=np.deg2rad(ctx.number(r.get("rel_phase_deg", 0.0), ("resource", "rel_phase_deg"))),
            white_noise=ctx.number(r.get("white_noise", 0.0), ("resource", "white_noise"), 0, 1),
        )

    if "plates" in data:
        plates = ctx.mapping(data["plates"], ("plates",), {"qwp", "hwp"})
        cfg.retardances = tuple(
            _plate(ctx, plates[name], ("plates", name), DEFAULT_PLATES[name]) if name in plates else np.deg2rad(DEFAULT_PLATES[name])
            for name in ("qwp", "hwp")
        )

    if "target_set" in data:
        if data["target_set"] != "axes":
            ctx.fail(("target_set",), "the only named target set is 'axes'")
        cfg.targets.extend((f"axes-{i:02d}", t) for i, t in enumerate(axis_targets()))

    for i, entry in enumerate(_seq(ctx, data.get("targets", []), ("targets",))):
        path = ("targets", i)
        entry = ctx.mapping(entry, path, TARGET_KEYS)
        tid = str(entry.get("id", f"target-{i:02d}"))
        if "bloch" in entry:
            if {"theta_deg", "phi_deg", "lam"} & entry.keys():
                ctx.fail(path, "give either bloch or theta_deg/phi_deg/lam")
            b = entry["bloch"]
            if not isinstance(b, list) or len(b) != 3:
                ctx.fail(path + ("bloch",), "bloch must be a list of three numbers")
            vec = [ctx.number(x, path + ("bloch", k)) for k, x in enumerate(b)]
            try:
                target = TargetState.from_bloch(vec)
            except ValueError as exc:
                ctx.fail(path + ("bloch",), str(exc))
        else:
            target = TargetState(
                np.deg2rad(ctx.number(entry.get("theta_deg", 0.0), path + ("theta_deg",))),
                np.deg2rad(ctx.number(entry.get("phi_deg", 0.0), path + ("phi_deg",))),
                ctx.number(entry.get("lam", 0.0), path + ("lam",), 0, 1),
            )
        cfg.targets.append((tid, target))

    for i, entry in enumerate(_seq(ctx, data.get("settings", []), ("settings",))):
        path = ("settings", i)
        entry = ctx.mapping(entry, path, SETTINGS_KEYS)
        t_d = ctx.number(entry.get("t_d", 1.0), path + ("t_d",), 0, 1)
        t_a = ctx.number(entry.get("t_a", 0.0), path + ("t_a",), 0, 1)
        if t_d + t_a == 0:
            ctx.fail(path, "t_d and t_a cannot both be zero")
        s = PrepSettings(
            np.deg2rad(ctx.number(entry.get("qwp_deg", 45.0), path + ("qwp_deg",))),
            np.deg2rad(ctx.number(entry.get("hwp_deg", 45.0), path + ("hwp_deg",))),
            t_d,
            t_a,
        )
        cfg.settings.append((str(entry.get("id", f"settings-{i:02d}")), s))

    if "bounds" in data:
        b = ctx.mapping(data["bounds"], ("bounds",), BOUNDS_KEYS)
        if ("tetra" in b) == ("matrix" in b):
            ctx.fail(("bounds",), "give exactly one of tetra or matrix")
        if "tetra" in b:
            t = b["tetra"]
            if not isinstance(t, list) or len(t) != 3:
                ctx.fail(("bounds", "tetra"), "tetra must be a list of three numbers")
            vals = [ctx.number(x, ("bounds", "tetra", k)) for k, x in enumerate(t)]
            try:
                cfg.tetra = TetrahedronState(*vals)
            except ValueError as exc:
                ctx.fail(("bounds", "tetra"), str(exc))
        else:
            try:
                cfg.matrix = qstate.validate(qstate.matrix_from_json(b["matrix"]), dim=4)
            except ValueError as exc:
                ctx.fail(("bounds", "matrix"), str(exc))
        if "samples" in b:
            n = b["samples"]
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                ctx.fail(("bounds", "samples"), "samples must be a positive integer")
            cfg.samples = n

    if "distill" in data:
        d = ctx.mapping(data["distill"], ("distill",), DISTILL_KEYS)
        cfg.distill_p = ctx.number(d.get("p"), ("distill", "p"), 0.5, 1)

    if "output" in data:
        o = ctx.mapping(data["output"], ("output",), OUTPUT_KEYS)
        cfg.output_dir = str(o["dir"]) if "dir" in o else None
    return cfg


def _seq(ctx: _Ctx, value, path):
    if not isinstance(value, list):
        ctx.fail(path, "expected a list")
    return value


def load_config(path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), seed_override)
