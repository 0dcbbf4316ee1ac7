"""Run configuration: a single JSON document, strictly validated.

Unknown keys are rejected with a spelling suggestion and the line they appear
on; constraint violations name the offending field. A run summary produced by
the CLI embeds its fully resolved configuration and is itself accepted as a
config file, which is what makes reruns byte-reproducible.
"""

from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass

from .errors import ConfigError
from .model import PairKinematics, SourceSpectrum, make_kinematics
from .pair_amplitude import PairAmplitudeField
from .quadrature import MCOracleSpec, QuadratureSpec


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _find_line(raw_text: str, key: str):
    needle = f'"{key}"'
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


class _Field:
    def __init__(self, default=None, required=False, kind="float",
                 positive=False, nonnegative=False, minimum=None,
                 choices=None, children=None):
        self.default = default
        self.required = required
        self.kind = kind
        self.positive = positive
        self.nonnegative = nonnegative
        self.minimum = minimum
        self.choices = choices
        self.children = children


_QUADRATURE_SCHEMA = {
    "pointsPerOscillation": _Field(default=8, kind="int", minimum=4),
    "truncationSigmas": _Field(default=6.0, kind="float", minimum=3.0),
    "maxGridPoints": _Field(default=1 << 28, kind="int", minimum=2048),
    "relTolerance": _Field(default=1e-4, kind="float", positive=True),
}

_MC_SCHEMA = {
    "sampleCount": _Field(default=200_000, kind="int", minimum=1000),
    "seed": _Field(default=None, kind="int", nonnegative=True),
    "batches": _Field(default=20, kind="int", minimum=10),
}

_SCAN_SCHEMA = {
    "variable": _Field(required=True, kind="str",
                       choices=("radius", "deltaP0", "crossover")),
    "values": _Field(default=None, kind="float_list"),
    "radius": _Field(default=4000.0, kind="float", positive=True),
}

_VALIDATE_SCHEMA = {
    "configCount": _Field(default=5, kind="int", minimum=1),
    "normTimes": _Field(default=[500.0, 1000.0], kind="float_list"),
    "normTolerance": _Field(default=0.01, kind="float", positive=True),
}

_SINGLE_SCHEMA = {
    "sigma0": _Field(default=1.0, kind="float", positive=True),
    "k": _Field(default=1.0, kind="float"),
    "m": _Field(default=1.0, kind="float", positive=True),
    "r0": _Field(default=0.0, kind="float"),
    "gridPoints": _Field(default=4096, kind="int", minimum=256),
    "times": _Field(default=[0.0, 1.0, 10.0, 100.0], kind="float_list"),
}

_SCHEMA = {
    "m1": _Field(default=1.0, positive=True),
    "m2": _Field(default=1.0, positive=True),
    "E0": _Field(default=1.0, positive=True),
    "deltaP0": _Field(default=0.05, positive=True),
    "deltaE": _Field(default=None, positive=True),   # None -> 0.05 * E0
    "amplitude": _Field(default=1.0, positive=True),
    "t": _Field(default=1000.0, positive=True),
    "r1": _Field(default=None, positive=True),       # None -> v1 * t
    "r2": _Field(default=None, positive=True),       # None -> v2 * t
    "gammaGridCells": _Field(default=512, kind="int", minimum=16),
    "radialPoints": _Field(default=257, kind="int", minimum=16),
    "sampleCount": _Field(default=100_000, kind="int", minimum=1000),
    "seed": _Field(default=None, kind="int", nonnegative=True),
    "samplerRadialCells": _Field(default=64, kind="int", minimum=8),
    "samplerGammaCells": _Field(default=1024, kind="int", minimum=64),
    "quadrature": _Field(default=None, kind="dict", children=_QUADRATURE_SCHEMA),
    "mcOracle": _Field(default=None, kind="dict", children=_MC_SCHEMA),
    "scan": _Field(default=None, kind="dict", children=_SCAN_SCHEMA),
    "validate": _Field(default=None, kind="dict", children=_VALIDATE_SCHEMA),
    "single": _Field(default=None, kind="dict", children=_SINGLE_SCHEMA),
}

# sections materialized with their defaults even when absent from the file
_ALWAYS_PRESENT = ("quadrature", "mcOracle", "validate", "single")


def _check_scalar(path, key, field, value, raw_text):
    where = f"{path}{key}"
    line = _find_line(raw_text, key)
    at = f" (line {line})" if line else ""
    if field.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string{at}", line=line)
        if field.choices and value not in field.choices:
            raise ConfigError(
                f"{where} must be one of {list(field.choices)}, got {value!r}{at}",
                line=line)
        return value
    if field.kind == "float_list":
        if (not isinstance(value, list) or len(value) == 0
                or not all(_is_number(v) for v in value)):
            raise ConfigError(f"{where} must be a non-empty list of numbers{at}",
                              line=line)
        values = [float(v) for v in value]
        if any(not math.isfinite(v) for v in values):
            raise ConfigError(f"{where} must contain finite numbers{at}", line=line)
        if len(values) > 1 and any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"{where} must be strictly increasing{at}", line=line)
        return values
    if not _is_number(value):
        raise ConfigError(f"{where} must be a number, got {value!r}{at}", line=line)
    if field.kind == "int":
        if float(value) != int(value):
            raise ConfigError(f"{where} must be an integer, got {value!r}{at}",
                              line=line)
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite{at}", line=line)
    if field.positive and not value > 0:
        raise ConfigError(f"{where} must be positive, got {value!r}{at}", line=line)
    if field.nonnegative and value < 0:
        raise ConfigError(f"{where} must be nonnegative, got {value!r}{at}",
                          line=line)
    if field.minimum is not None and value < field.minimum:
        raise ConfigError(f"{where} must be >= {field.minimum}, got {value!r}{at}",
                          line=line)
    return value


def _validate_mapping(obj, schema, path, raw_text):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path.rstrip('.') or 'config'} must be a JSON object")
    resolved = {}
    for key, value in obj.items():
        if key not in schema:
            line = _find_line(raw_text, key)
            at = f" (line {line})" if line else ""
            hint = difflib.get_close_matches(key, schema.keys(), n=1)
            suggest = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown key {path}{key!r}{at}{suggest}", line=line)
        field = schema[key]
        if field.kind == "dict":
            if value is None:
                continue
            resolved[key] = _validate_mapping(value, field.children,
                                              f"{path}{key}.", raw_text)
        elif value is None:
            resolved[key] = None
        else:
            resolved[key] = _check_scalar(path, key, field, value, raw_text)
    for key, field in schema.items():
        if key in resolved:
            continue
        if field.required:
            raise ConfigError(f"missing required key {path}{key!r}")
        if field.kind == "dict":
            if key in _ALWAYS_PRESENT and path == "":
                resolved[key] = _validate_mapping({}, field.children,
                                                  f"{path}{key}.", raw_text)
        else:
            resolved[key] = field.default
    return resolved


@dataclass
class RunConfig:
    """Fully resolved configuration with typed accessors."""

    data: dict

    def kinematics(self) -> PairKinematics:
        return make_kinematics(self.data["m1"], self.data["m2"], self.data["E0"])

    def spectrum(self) -> SourceSpectrum:
        return SourceSpectrum(delta_p0=self.data["deltaP0"], E0=self.data["E0"],
                              delta_e=self.data["deltaE"],
                              amplitude=self.data["amplitude"])

    def quadrature(self) -> QuadratureSpec:
        q = self.data["quadrature"]
        return QuadratureSpec(points_per_oscillation=q["pointsPerOscillation"],
                              truncation_sigmas=q["truncationSigmas"],
                              max_grid_points=q["maxGridPoints"],
                              rel_tolerance=q["relTolerance"])

    def field(self) -> PairAmplitudeField:
        return PairAmplitudeField(spectrum=self.spectrum(), kin=self.kinematics(),
                                  quad=self.quadrature())

    def mc_spec(self) -> MCOracleSpec:
        mc = self.data["mcOracle"]
        if mc["seed"] is None:
            raise ConfigError("mcOracle.seed is required for this command")
        return MCOracleSpec(sample_count=mc["sampleCount"], seed=mc["seed"],
                            batches=mc["batches"])

    def require_seed(self) -> int:
        if self.data["seed"] is None:
            raise ConfigError("seed is required for any sampling command")
        return self.data["seed"]


def resolve_config(obj: dict, raw_text: str = "") -> RunConfig:
    """Validate a parsed JSON object and materialize all defaults."""
    if isinstance(obj, dict) and "config" in obj and "command" in obj:
        obj = obj["config"]  # a run summary; rerun from its embedded config
    data = _validate_mapping(obj, _SCHEMA, "", raw_text)
    if data["deltaE"] is None:
        data["deltaE"] = 0.05 * data["E0"]
    kin = make_kinematics(data["m1"], data["m2"], data["E0"])
    if data["r1"] is None:
        data["r1"] = kin.v1 * data["t"]
    if data["r2"] is None:
        data["r2"] = kin.v2 * data["t"]
    return RunConfig(data=data)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}", line=exc.lineno) from exc
    return resolve_config(obj, raw)
