"""Run configuration: a YAML document validated against a fixed schema.

Example::

    model: {length: 32, coupling: 4.0}
    dmrg: {chi_max: 256, sweeps: 12, seed: 0}
    networks:
      - {kind: MERA, depth: 4, n_shots: 2000}
      - {kind: GMERA, depth: 2, n_shots: 1000}
    optimize: {max_cycles: 1000, rel_tol: 1.0e-10, restarts: 4}
    noise:
      - {p1: 0.0}
      - {p1: 1.0e-3}          # p2 defaults to ratio * p1 (ratio 10)
    sampling: {n_shots: 2000, basis: X, seed: 1234}
    analysis: {anchor: 10, windows: [20]}
    output: {directory: fig3, formats: [csv, json, qasm3]}

Unknown keys are rejected. Relative output directories are resolved against
``$HOLOMERA_OUTPUT_ROOT`` (default: the current directory).
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .network import KINDS, check_depth


OUTPUT_FORMATS = ("csv", "json", "qasm3")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class ModelConfig:
    length: int = 32
    coupling: float = 4.0


@dataclass
class DmrgConfig:
    chi_max: int = 256
    sweeps: int = 12
    seed: int = 0
    cutoff: float = 1e-8
    tol: float = 1e-10
    strict: bool = False


@dataclass
class NetworkSpec:
    kind: str = "MERA"
    depth: int = 1
    n_shots: int | None = None

    @property
    def name(self) -> str:
        return f"{self.kind.lower()}_d{self.depth}"


@dataclass
class BuildConfig:
    disentangler_iters: int = 100
    chi_ref: int = 64


@dataclass
class OptimizeConfig:
    max_cycles: int = 1000
    rel_tol: float = 1e-10
    chi_ref: int = 64
    restarts: int = 0  # extra seeded random starts; the best final fidelity wins
    seed: int = 0


@dataclass
class CompileConfig:
    decompose: bool = True
    gauge_reduce: bool = True
    seed: int = 0


@dataclass
class NoiseLevel:
    p1: float = 0.0
    p2: float | None = None
    ratio: float = 10.0

    def resolved(self) -> tuple[float, float]:
        p2 = self.ratio * self.p1 if self.p2 is None else self.p2
        return float(self.p1), float(min(1.0, p2))

    @property
    def name(self) -> str:
        p1, p2 = self.resolved()
        return f"p1_{p1:g}_p2_{p2:g}"


@dataclass
class SamplingConfig:
    n_shots: int = 2000
    basis: str = "X"
    seed: int = 1234
    backend: str | None = None


@dataclass
class AnalysisConfig:
    anchor: int | None = None
    windows: list = field(default_factory=lambda: [20])


@dataclass
class OutputConfig:
    directory: str = "holomera-run"
    formats: list = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    dmrg: DmrgConfig = field(default_factory=DmrgConfig)
    networks: list = field(default_factory=lambda: [NetworkSpec()])
    build: BuildConfig = field(default_factory=BuildConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    compile: CompileConfig = field(default_factory=CompileConfig)
    noise: list = field(default_factory=lambda: [NoiseLevel()])
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def anchor(self) -> int:
        return self.analysis.anchor if self.analysis.anchor is not None else default_anchor(self.model.length)

    def output_dir(self) -> Path:
        p = Path(self.output.directory)
        if not p.is_absolute():
            p = Path(os.environ.get("HOLOMERA_OUTPUT_ROOT", ".")) / p
        return p

    def to_dict(self) -> dict:
        return asdict(self)


def default_anchor(length: int) -> int:
    """Bulk anchor site (1-based): 10 for L=32, 66 for L=256, proportional otherwise."""
    if length == 32:
        return 10
    return max(1, int(length * 66 / 256 + 0.5))


_SECTIONS = {
    "model": ModelConfig, "dmrg": DmrgConfig, "build": BuildConfig, "optimize": OptimizeConfig,
    "compile": CompileConfig, "sampling": SamplingConfig, "analysis": AnalysisConfig,
    "output": OutputConfig,
}
_LISTS = {"networks": NetworkSpec, "noise": NoiseLevel}


def _coerce(value, current, path):
    """Check ``value`` against the type of the default ``current``."""
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    return value  # optional fields (default None) are checked in validate()


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    obj = cls()
    names = {f.name for f in fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {', '.join(sorted(names))})")
        setattr(obj, key, _coerce(value, getattr(obj, key), f"{path}.{key}"))
    return obj


def from_dict(data: dict) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    cfg = RunConfig()
    for key, value in data.items():
        if key in _SECTIONS:
            setattr(cfg, key, _build(_SECTIONS[key], value, key))
        elif key in _LISTS:
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{key}: expected a non-empty list")
            setattr(cfg, key, [_build(_LISTS[key], v, f"{key}[{i}]") for i, v in enumerate(value)])
        else:
            raise ConfigError(f"{key}: unknown section (allowed: {', '.join(sorted([*_SECTIONS, *_LISTS]))})")
    validate(cfg)
    return cfg


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _opt_number(v, path, integer=False):
    if v is None:
        return
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    _check(ok and not isinstance(v, bool), f"{path}: expected a {'n integer' if integer else ' number'} or null")


def validate(cfg: RunConfig) -> None:
    L = cfg.model.length
    _check(L >= 4 and L & (L - 1) == 0, f"model.length: must be a power of two >= 4, got {L}")
    _check(cfg.dmrg.chi_max >= 2, "dmrg.chi_max: must be >= 2")
    _check(cfg.dmrg.sweeps >= 1, "dmrg.sweeps: must be >= 1")
    _check(cfg.dmrg.cutoff >= 0, "dmrg.cutoff: must be >= 0")
    _check(cfg.build.chi_ref >= 2 and cfg.optimize.chi_ref >= 2, "chi_ref: must be >= 2")
    _check(cfg.build.disentangler_iters >= 0, "build.disentangler_iters: must be >= 0")
    _check(cfg.optimize.max_cycles >= 0, "optimize.max_cycles: must be >= 0")
    _check(cfg.optimize.rel_tol >= 0, "optimize.rel_tol: must be >= 0")
    _check(cfg.optimize.restarts >= 0, "optimize.restarts: must be >= 0")
    _check(cfg.sampling.basis in ("X", "Z"), "sampling.basis: must be X or Z")
    for f in cfg.output.formats:
        _check(f in OUTPUT_FORMATS, f"output.formats: unknown format {f!r} (allowed: {', '.join(OUTPUT_FORMATS)})")
    _check(cfg.sampling.n_shots >= 0, "sampling.n_shots: must be >= 0")
    _check(cfg.sampling.backend in (None, "cython", "python"), "sampling.backend: must be cython, python or null")
    seen = set()
    for i, net in enumerate(cfg.networks):
        net.kind = net.kind.upper().replace("-", "").replace("_", "")
        _check(net.kind in KINDS, f"networks[{i}].kind: must be one of {', '.join(KINDS)}")
        try:
            check_depth(net.kind, net.depth, L)
        except ValueError as exc:
            raise ConfigError(f"networks[{i}].depth: {exc}") from None
        _opt_number(net.n_shots, f"networks[{i}].n_shots", integer=True)
        _check(net.name not in seen, f"networks[{i}]: duplicate network {net.name}")
        seen.add(net.name)
    names = set()
    for i, lvl in enumerate(cfg.noise):
        _opt_number(lvl.p2, f"noise[{i}].p2")
        p1, p2 = lvl.resolved()
        _check(0 <= p1 <= 1 and 0 <= p2 <= 1, f"noise[{i}]: rates must lie in [0, 1]")
        _check(lvl.ratio >= 0, f"noise[{i}].ratio: must be >= 0")
        _check(lvl.name not in names, f"noise[{i}]: duplicate noise level {lvl.name}")
        names.add(lvl.name)
    _opt_number(cfg.analysis.anchor, "analysis.anchor", integer=True)
    _check(1 <= cfg.anchor < L, f"analysis.anchor: must lie in 1..{L - 1}")
    for w in cfg.analysis.windows:
        _check(isinstance(w, int) and w >= 1, f"analysis.windows: entries must be positive integers, got {w!r}")


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    return from_dict(data)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
    data = dict(data or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key.path=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = {}
            elif not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {p} is not a section")
            node[p] = nxt = dict(nxt)
            node = nxt
        node[parts[-1]] = value
    return data
