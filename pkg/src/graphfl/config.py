"""Experiment configuration: dataclasses plus an INI reader/writer.

One ``[section]`` per concern; every key is optional and unknown keys are
rejected.  Sequences are comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .optimizer import ScheduleBounds

__all__ = [
    "ConfigError",
    "RunSection",
    "GraphSection",
    "DataSection",
    "ModelSection",
    "SystemSection",
    "SweepSection",
    "ExperimentConfig",
    "parse_config",
    "config_from_string",
    "config_to_string",
    "write_config",
    "with_overrides",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunSection:
    rounds: int = 200
    seed: int = 0
    aggregator: str = "gfedfilt"
    mu_s: float = 10.0
    optimize: bool = False
    alpha: int = 3
    eta: float = 0.05
    batch_size: int = 32

    def validate(self):
        if self.rounds < 1:
            raise ConfigError("run.rounds: must be >= 1")
        if self.aggregator not in ("gfedfilt", "fedavg"):
            raise ConfigError(f"run.aggregator: expected gfedfilt or fedavg, got {self.aggregator!r}")
        if not self.mu_s >= 0:
            raise ConfigError("run.mu_s: must be >= 0")
        if self.alpha < 1:
            raise ConfigError("run.alpha: must be >= 1")
        if not self.eta >= 0:
            raise ConfigError("run.eta: must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("run.batch_size: must be >= 1")


@dataclass(frozen=True)
class GraphSection:
    source: str = "rooms"          # rooms | positions | adjacency
    path: str = ""
    num_devices: int = 20
    num_rooms: int = 4
    room_size: float = 10.0
    devices_per_room: tuple[int, ...] = (4, 7)
    d_max: float = 8.0
    require_connected: bool = True

    def validate(self):
        if self.source not in ("rooms", "positions", "adjacency"):
            raise ConfigError(f"graph.source: unknown source {self.source!r}")
        if self.source != "rooms" and not self.path:
            raise ConfigError("graph.path: required for file-based graph sources")
        if self.num_devices < 1 or self.num_rooms < 1:
            raise ConfigError("graph.num_devices/num_rooms: must be >= 1")
        if len(self.devices_per_room) != 2 or self.devices_per_room[0] > self.devices_per_room[1]:
            raise ConfigError("graph.devices_per_room: expected 'min, max'")
        if not self.d_max > 0:
            raise ConfigError("graph.d_max: must be > 0")


@dataclass(frozen=True)
class DataSection:
    source: str = "synthetic"      # synthetic | mnist
    mnist_images: str = ""
    mnist_labels: str = ""
    num_classes: int = 10
    dim: int = 32
    per_class: int = 3000
    separation: float = 3.0
    labels_per_device: int = 2
    train_per_device: int = 450
    local_test_per_device: int = 100
    global_test_size: int = 100
    setup: str = "random"

    def validate(self):
        if self.source not in ("synthetic", "mnist"):
            raise ConfigError(f"data.source: unknown source {self.source!r}")
        if self.source == "mnist" and not (self.mnist_images and self.mnist_labels):
            raise ConfigError("data.mnist_images/mnist_labels: required for mnist")
        if self.setup not in ("random", "cluster_aligned"):
            raise ConfigError(f"data.setup: unknown setup {self.setup!r}")
        if not 1 <= self.labels_per_device <= self.num_classes:
            raise ConfigError("data.labels_per_device: must lie in [1, num_classes]")
        for name in ("dim", "per_class", "train_per_device", "local_test_per_device",
                     "global_test_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"data.{name}: must be >= 1")
        if self.separation < 0:
            raise ConfigError("data.separation: must be >= 0")


@dataclass(frozen=True)
class ModelSection:
    hidden: tuple[int, ...] = (128,)

    def validate(self):
        if any(h < 1 for h in self.hidden):
            raise ConfigError("model.hidden: layer sizes must be >= 1")


@dataclass(frozen=True)
class SystemSection:
    specs_path: str = ""
    rho: tuple[float, ...] = (1e4, 5e4)
    f: tuple[float, ...] = (1e9, 3.5e9)
    p_tran: tuple[float, ...] = (0.5, 1.0)
    xi_db: tuple[float, ...] = (1.0, 2.0)
    bandwidth: float = 20e6
    varsigma: float = 1e-28
    e_max: float = 1.0
    n0_dbm_hz: float = -174.0

    def validate(self):
        for name in ("rho", "f", "p_tran", "xi_db"):
            rng = getattr(self, name)
            if len(rng) != 2 or rng[0] > rng[1]:
                raise ConfigError(f"system.{name}: expected 'min, max' with min <= max")
        for name in ("rho", "f", "p_tran"):
            if getattr(self, name)[0] <= 0:
                raise ConfigError(f"system.{name}: must be positive")
        for name in ("bandwidth", "varsigma", "e_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"system.{name}: must be > 0")


@dataclass(frozen=True)
class SweepSection:
    mu_s: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    aggregators: tuple[str, ...] = ("fedavg", "gfedfilt")

    def validate(self):
        for a in self.aggregators:
            if a not in ("fedavg", "gfedfilt"):
                raise ConfigError(f"sweep.aggregators: unknown aggregator {a!r}")
        if any(m < 0 for m in self.mu_s):
            raise ConfigError("sweep.mu_s: values must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    graph: GraphSection = field(default_factory=GraphSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    system: SystemSection = field(default_factory=SystemSection)
    schedule: ScheduleBounds = field(default_factory=ScheduleBounds)
    sweep: SweepSection = field(default_factory=SweepSection)

    def validate(self) -> "ExperimentConfig":
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            if hasattr(section, "validate"):
                section.validate()
        return self


_SECTIONS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(raw: str, typ, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        origin = typing.get_origin(typ)
        if origin is tuple:
            (item,) = {a for a in typing.get_args(typ) if a is not Ellipsis}
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(_convert(p, item, where) for p in parts)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _build(parser: configparser.ConfigParser) -> ExperimentConfig:
    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section")
        cls = _SECTIONS[name].default_factory
        hints = typing.get_type_hints(cls)
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"{name}.{key}: unknown key")
            values[key] = _convert(raw, hints[key], f"{name}.{key}")
        try:
            sections[name] = cls(**values)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    return ExperimentConfig(**sections).validate()


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    return parser


def config_from_string(text: str) -> ExperimentConfig:
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return _build(parser)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    return config_from_string(path.read_text())


def config_to_string(config: ExperimentConfig) -> str:
    parser = _parser()
    for name in _SECTIONS:
        section = getattr(config, name)
        parser[name] = {f.name: _format(getattr(section, f.name)) for f in dataclasses.fields(section)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(config_to_string(config))


def with_overrides(config: ExperimentConfig, **run_fields) -> ExperimentConfig:
    """Copy of ``config`` with ``[run]`` fields replaced (None values ignored)."""
    changes = {k: v for k, v in run_fields.items() if v is not None}
    if not changes:
        return config
    return dataclasses.replace(config, run=dataclasses.replace(config.run, **changes)).validate()
