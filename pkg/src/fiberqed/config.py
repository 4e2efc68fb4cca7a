"""Run configuration: flat ``key = value`` text with ``[section]`` headers.

Keys before the first section belong to the root and use the short
caption-style names (``Gamma, GammaF, Delta, DeltaF, lambdaA, hbar, m, w0,
k, g, x0, y0, vx0, vy0, t, dt``). Each one is an alias for a sectioned key;
giving both spellings is an error, as is any unknown key.

Branch sections are named ``[branch.N]`` with an integer index N.
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import io as fio
from .fiber import AtomSpec, BranchSpec, FiberSpec, unit_system
from .forces import FiberForceModel, ModelFlags
from .langevin import IntegratorConfig, normalize_noise_mode
from .modes import ModeSuperposition, load_mode_table
from .response import DriveSpec

ROOT = "root"


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str(s):
    return str(s).strip()


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(";", ",").split(",") if v.strip()]


def _pair(s):
    vals = [int(v) for v in (s if isinstance(s, (list, tuple)) else str(s).split(","))]
    if len(vals) != 2:
        raise ValueError(f"expected 'l, m', got {s!r}")
    return vals


# section -> key -> parser; values absent from the file stay unset
SCHEMA: dict[str, dict[str, Any]] = {
    "units": {"preset": _str, "c": _float, "hbar": _float},
    "atom": {"omega_A": _float, "gamma": _float, "lambda_A": _float, "mass": _float},
    "fiber": {
        "core_diameter": _float, "K": _float, "bulk_Gamma_F": _float, "delta_F": _float,
        "threshold_window": _float, "mode_table": _str, "quad_epsabs": _float, "quad_epsrel": _float,
        "branch_truncation": _int,
    },
    "branch": {"omega_th": _float, "mode": _str, "hg": _pair, "waist": _float, "K": _float},
    "drive": {
        "mode": _str, "hg": _pair, "waist": _float, "amplitude": _float, "g": _float,
        "detuning": _float, "wave": _str, "k": _float, "normalization": _str, "phase": _float,
    },
    "model": {
        "planar": _bool, "threshold_friction": _bool, "vacuum_friction": _bool,
        "include_react": _bool, "drive_axial_only": _bool,
    },
    "integrator": {
        "dt": _float, "t_max": _float, "noise_mode": _str, "seed": _int, "core_exit_radius": _float,
        "stop_on_exit": _bool, "decimate": _int,
        "x0": _float, "y0": _float, "z0": _float, "vx0": _float, "vy0": _float, "vz0": _float,
    },
    "sweep": {"parameter": _str, "values": _floats, "repetitions": _int, "base_seed": _int},
    "grid": {"half_width": _float, "points": _int, "z": _float},
    "scan": {"omega_th": _floats, "f": _float, "A_n": _float, "cK": _float},
}

CAPTION_KEYS = {
    "Gamma": ("atom", "gamma"),
    "GammaF": ("fiber", "bulk_Gamma_F"),
    "Delta": ("drive", "detuning"),
    "DeltaF": ("fiber", "delta_F"),
    "lambdaA": ("atom", "lambda_A"),
    "hbar": ("units", "hbar"),
    "m": ("atom", "mass"),
    "w0": ("drive", "waist"),
    "k": ("drive", "k"),
    "g": ("drive", "g"),
    "x0": ("integrator", "x0"),
    "y0": ("integrator", "y0"),
    "vx0": ("integrator", "vx0"),
    "vy0": ("integrator", "vy0"),
    "t": ("integrator", "t_max"),
    "dt": ("integrator", "dt"),
}

DEFAULTS = {
    "units": {"preset": "si-micro"},
    "fiber": {"core_diameter": 50.0, "K": 0.0, "delta_F": 0.0, "quad_epsabs": 1e-10, "quad_epsrel": 1e-8},
    "drive": {"amplitude": 1.0, "wave": "travelling", "normalization": "peak", "phase": 0.0, "hg": [0, 0]},
    "model": {"planar": True, "vacuum_friction": True, "include_react": True, "drive_axial_only": False},
    "integrator": {"noise_mode": "physical", "seed": 0, "stop_on_exit": True, "decimate": 1,
                   "z0": 0.0, "vz0": 0.0, "x0": 0.0, "y0": 0.0, "vx0": 0.0, "vy0": 0.0},
    "sweep": {"parameter": "detuning", "repetitions": 1, "base_seed": 0},
    "grid": {"half_width": 20.0, "points": 41, "z": 0.0},
    "scan": {"A_n": 1.0},
}

CAPTION_PRESET = """\
Gamma = 37.6991
GammaF = 37.6991
Delta = 7728.32
DeltaF = 0.0
lambdaA = 0.78
hbar = 1
m = 2.27369
w0 = 10
k = 8.05537
g = 2443.94
x0 = 9
y0 = 12
vx0 = 0.812
vy0 = 0.81
t = 1500
dt = 0.05
"""


def _schema_for(section):
    if section.startswith("branch."):
        return SCHEMA["branch"]
    return SCHEMA.get(section)


@dataclass
class RunConfig:
    """Resolved settings ``section -> key -> value`` plus the base directory for relative paths."""

    settings: dict
    base_dir: str = "."
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction ------------------------------------------------------
    @classmethod
    def from_text(cls, text: str, base_dir=".", source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                       default_section="__defaults__")
        cp.optionxform = str
        try:
            cp.read_string(f"[{ROOT}]\n" + text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        raw: dict[str, dict[str, str]] = {s: dict(cp.items(s, raw=True)) for s in cp.sections()}
        return cls.from_raw(raw, base_dir, source)

    @classmethod
    def from_raw(cls, raw: dict, base_dir=".", source: str = "<config>") -> "RunConfig":
        problems = []
        settings: dict[str, dict] = {}
        for section, items in raw.items():
            if section == ROOT:
                for key, value in items.items():
                    if key not in CAPTION_KEYS:
                        problems.append(f"{source}: unknown top-level key {key!r}")
                        continue
                    sec, name = CAPTION_KEYS[key]
                    cls._set(settings, sec, name, value, SCHEMA[sec][name], problems, source, key)
                continue
            schema = _schema_for(section)
            if schema is None:
                problems.append(f"{source}: unknown section [{section}]")
                continue
            if section.startswith("branch."):
                try:
                    int(section.split(".", 1)[1])
                except ValueError:
                    problems.append(f"{source}: branch section [{section}] needs an integer index")
                    continue
            for key, value in items.items():
                if key not in schema:
                    problems.append(f"{source}: unknown key {key!r} in [{section}]")
                    continue
                cls._set(settings, section, key, value, schema[key], problems, source, f"{section}.{key}")
        if problems:
            raise ConfigError(problems)
        cfg = cls(settings, str(base_dir))
        cfg.validate()
        return cfg

    @staticmethod
    def _set(settings, section, key, value, parser, problems, source, label):
        sec = settings.setdefault(section, {})
        if key in sec:
            alias = [a for a, t in CAPTION_KEYS.items() if t == (section, key)]
            other = f"top-level {alias[0]!r}" if alias and label != alias[0] else f"{section}.{key}"
            problems.append(f"{source}: {label} is given twice (also as {other})")
            return
        try:
            sec[key] = parser(value)
        except (TypeError, ValueError) as exc:
            problems.append(f"{source}: bad value for {label}: {exc}")

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, p.parent, str(p))

    @classmethod
    def caption(cls) -> "RunConfig":
        return cls.from_text(CAPTION_PRESET, source="<caption preset>")

    @classmethod
    def from_json(cls, text: str, base_dir=".") -> "RunConfig":
        return cls.from_raw(json.loads(text), base_dir, "<json>")

    # -- access ------------------------------------------------------------
    def get(self, section, key, default=None):
        sec = self.settings.get(section, {})
        if key in sec:
            return sec[key]
        base = "branch" if section.startswith("branch.") else section
        return DEFAULTS.get(base, {}).get(key, default)

    def has(self, section, key) -> bool:
        return key in self.settings.get(section, {})

    def require(self, section, key):
        if not self.has(section, key) and self.get(section, key) is None:
            alias = [a for a, target in CAPTION_KEYS.items() if target == (section, key)]
            hint = f" (or top-level {alias[0]!r})" if alias else ""
            raise ConfigError(f"missing required key {section}.{key}{hint}")
        return self.get(section, key)

    def with_overrides(self, **sections) -> "RunConfig":
        settings = json.loads(json.dumps(self.settings))
        for section, items in sections.items():
            settings.setdefault(section, {}).update(items)
        return RunConfig.from_raw(settings, self.base_dir)

    # -- serialisation -----------------------------------------------------
    def to_json(self) -> str:
        return fio.dumps(self.settings)

    def to_text(self) -> str:
        lines = []
        for section in sorted(self.settings):
            lines.append(f"[{section}]")
            for key in sorted(self.settings[section]):
                v = self.settings[section][key]
                if isinstance(v, list):
                    text = ", ".join(fio.fmt(x) for x in v)
                elif isinstance(v, str):
                    text = v
                else:
                    text = fio.fmt(v)
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)

    # -- validation and builders ---------------------------------------------
    def validate(self) -> None:
        problems = []
        for section, key in (("atom", "gamma"), ("atom", "lambda_A"), ("atom", "mass")):
            if self.get(section, key) is None:
                alias = [a for a, t in CAPTION_KEYS.items() if t == (section, key)]
                problems.append(f"missing required key {section}.{key}"
                                + (f" (or top-level {alias[0]!r})" if alias else ""))
        if self.get("units", "preset") not in ("si-micro", "natural"):
            problems.append(f"units.preset must be 'si-micro' or 'natural', got {self.get('units', 'preset')!r}")
        try:
            normalize_noise_mode(self.get("integrator", "noise_mode"))
        except ValueError as exc:
            problems.append(str(exc))
        if self.get("drive", "wave") not in ("travelling", "standing"):
            problems.append("drive.wave must be 'travelling' or 'standing'")
        if self.get("drive", "normalization") not in ("peak", "area"):
            problems.append("drive.normalization must be 'peak' or 'area'")
        if self.has("drive", "mode") and self.get("fiber", "mode_table") is None:
            problems.append("drive.mode names a table entry but fiber.mode_table is not set")
        for s in self.branch_sections():
            if self.get(s, "omega_th") is None:
                problems.append(f"missing required key {s}.omega_th")
            if self.has(s, "mode") and self.get("fiber", "mode_table") is None:
                problems.append(f"{s}.mode names a table entry but fiber.mode_table is not set")
        if self.has("sweep", "values") and not self.get("sweep", "values"):
            problems.append("sweep.values must not be empty")
        if problems:
            raise ConfigError(problems)

    def branch_sections(self):
        return sorted((s for s in self.settings if s.startswith("branch.")), key=lambda s: int(s.split(".")[1]))

    def units(self):
        return unit_system(self.get("units", "preset"), self.get("units", "c"), self.get("units", "hbar"))

    def mode_table(self) -> dict[str, ModeSuperposition]:
        if "table" not in self._cache:
            path = self.get("fiber", "mode_table")
            table = {}
            if path:
                p = Path(path)
                if not p.is_absolute():
                    p = Path(self.base_dir) / p
                table = {m.label: m for m in load_mode_table(p)}
            self._cache["table"] = table
        return self._cache["table"]

    def _profile(self, section, waist) -> ModeSuperposition:
        if self.has(section, "mode"):
            label = self.get(section, "mode")
            table = self.mode_table()
            if label not in table:
                raise ConfigError(f"{section}.mode refers to unknown table entry {label!r}")
            return table[label].with_waist(waist)
        l, m = self.get(section, "hg")
        return ModeSuperposition.hg(l, m, waist)

    def atom(self) -> AtomSpec:
        units = self.units()
        lam = self.require("atom", "lambda_A")
        omega_A = self.get("atom", "omega_A")
        if omega_A is None:
            omega_A = 2.0 * math.pi * units.c / lam
        return AtomSpec(omega_A, self.require("atom", "gamma"), lam, self.require("atom", "mass"))

    def drive_waist(self) -> float:
        return self.require("drive", "waist")

    def fiber(self) -> FiberSpec:
        units = self.units()
        branches = []
        for s in self.branch_sections():
            waist = self.get(s, "waist", None) or self.drive_waist()
            branches.append(BranchSpec(int(s.split(".")[1]), self.get(s, "omega_th"),
                                       self._profile(s, waist), self.get(s, "K")))
        trunc = self.get("fiber", "branch_truncation")
        if trunc is not None:
            branches = branches[:trunc]
        return FiberSpec(
            core_diameter=self.get("fiber", "core_diameter"), K=self.get("fiber", "K"),
            branches=tuple(branches), bulk_Gamma_F=self.get("fiber", "bulk_Gamma_F"),
            delta_F=self.get("fiber", "delta_F"), c=units.c,
            threshold_window=self.get("fiber", "threshold_window"),
            quad_epsabs=self.get("fiber", "quad_epsabs"), quad_epsrel=self.get("fiber", "quad_epsrel"),
        )

    def drive(self) -> DriveSpec:
        atom = self.atom()
        k = self.get("drive", "k")
        if k is None:
            k = atom.k_A(self.units().c)
        return DriveSpec(
            profile=self._profile("drive", self.drive_waist()), amplitude=self.get("drive", "amplitude"),
            g=self.require("drive", "g"), detuning=self.require("drive", "detuning"),
            wave_kind=self.get("drive", "wave"), k=k, normalization=self.get("drive", "normalization"),
            global_phase=self.get("drive", "phase"),
        )

    def flags(self) -> ModelFlags:
        return ModelFlags(
            planar=self.get("model", "planar"), threshold_friction=self.get("model", "threshold_friction"),
            vacuum_friction=self.get("model", "vacuum_friction"), include_react=self.get("model", "include_react"),
            drive_axial_only=self.get("model", "drive_axial_only"),
        )

    def model(self) -> FiberForceModel:
        return FiberForceModel(self.atom(), self.fiber(), self.drive(), self.units().hbar, self.flags())

    def integrator(self, **override) -> IntegratorConfig:
        radius = self.get("integrator", "core_exit_radius")
        if radius is None:
            radius = 0.5 * self.get("fiber", "core_diameter")
        kw = dict(
            dt=self.require("integrator", "dt"), t_max=self.require("integrator", "t_max"),
            noise_mode=self.get("integrator", "noise_mode"), seed=self.get("integrator", "seed"),
            core_exit_radius=radius, stop_on_exit=self.get("integrator", "stop_on_exit"),
            decimate=self.get("integrator", "decimate"),
        )
        kw.update(override)
        return IntegratorConfig(**kw)

    def initial_state(self):
        g = lambda k: self.get("integrator", k)  # noqa: E731
        return (g("x0"), g("y0"), g("z0")), (g("vx0"), g("vy0"), g("vz0"))


def parse_config(path) -> RunConfig:
    return RunConfig.load(path)
