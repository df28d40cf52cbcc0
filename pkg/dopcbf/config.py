"""Experiment configuration: sections, schema mapping and overrides.

An experiment file is read with `dopcbf.parser`, overrides given as
`dotted.path=value` are spliced into the document, and the document is then
mapped section by section onto frozen dataclasses. Every failure is a
`ConfigurationError` naming the dotted field path (`acc.M`) and, when the
value came from a file, its line and column.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from .acc import CONTROLLERS, AccParams, FilterParams, acc_observer_config, acc_plant, dop_barrier
from .document import Document, Node, from_plain, set_path
from .error import ConfigurationError, ContractViolation
from .integrator import SimConfig
from .metrics import MIN_SAMPLES, window_start
from .parser import parse_str, parse_value_str
from .safety_filter import RobustnessParams
from .scenarios import (
    BATCH_KNOT_INTERVAL, DEFAULT_RATE_BOUND, KINDS, RoadProfile,
    constant_road, random_road, three_section_profile,
)

logger = logging.getLogger(__name__)

SCHEMA = "dopcbf/experiment/1"
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class RoadConfig:
    kind: str = "three_section"
    theta: float = 0.0
    knots: Tuple[Tuple[float, float], ...] = ()
    rate_bound: float = DEFAULT_RATE_BOUND
    knot_interval: float = BATCH_KNOT_INTERVAL
    file: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError("kind", f"must be one of {', '.join(KINDS)}")
        if not self.rate_bound > 0.0:
            raise ConfigurationError("rate_bound", "must be > 0")
        if not self.knot_interval > 0.0:
            raise ConfigurationError("knot_interval", "must be > 0")
        if self.kind == "table" and not self.knots and self.file is None:
            raise ConfigurationError("knots", "a table road needs knots or a file")


@dataclass(frozen=True)
class InitialState:
    D: float = 70.0
    v: float = 20.0

    def __post_init__(self):
        if not self.D >= 0.0:
            raise ConfigurationError("D", "must be >= 0")
        if not self.v >= 0.0:
            raise ConfigurationError("v", "must be >= 0")


@dataclass(frozen=True)
class ObserverSection:
    Lr: Tuple[float, ...] = (3.0, 3.0)

    def __post_init__(self):
        if len(self.Lr) != 2:
            raise ConfigurationError("Lr", f"needs 2 entries, got {len(self.Lr)}")


@dataclass(frozen=True)
class MetricsConfig:
    transient_skip: float = 5.0

    def __post_init__(self):
        if not self.transient_skip >= 0.0:
            raise ConfigurationError("transient_skip", "must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run, batch or sweep needs."""
    controller: str = "dopcbf"
    road: RoadConfig = field(default_factory=RoadConfig)
    acc: AccParams = field(default_factory=AccParams)
    initial: InitialState = field(default_factory=InitialState)
    filter: FilterParams = field(default_factory=FilterParams)
    observer: ObserverSection = field(default_factory=ObserverSection)
    sim: SimConfig = field(default_factory=SimConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigurationError("controller", f"must be one of {', '.join(CONTROLLERS)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigurationError("seed", "must be an integer in [0, 2^64)")

    def replace(self, **changes) -> 'ExperimentConfig':
        return dataclasses.replace(self, **changes)


SECTIONS = {
    "road": RoadConfig,
    "acc": AccParams,
    "initial": InitialState,
    "filter": FilterParams,
    "observer": ObserverSection,
    "sim": SimConfig,
    "metrics": MetricsConfig,
}

# fields whose kind cannot be read off their default value
_FIELD_KINDS = {
    "road.knots": "pairs",
    "road.file": "optional_str",
    "observer.Lr": "floats",
}


def _kind_of(path: str, default: Any) -> str:
    if path in _FIELD_KINDS:
        return _FIELD_KINDS[path]
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "float"
    return "str"


def _number(node: Node, path: str) -> float:
    if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
        raise ConfigurationError(path, "expected a number", node.span)
    return float(node.value)


def _coerce(kind: str, node: Node, path: str) -> Any:
    v = node.value
    if kind == "float":
        return _number(node, path)
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigurationError(path, "expected an integer", node.span)
        return v
    if kind == "bool":
        if not isinstance(v, bool):
            raise ConfigurationError(path, "expected true or false", node.span)
        return v
    if kind == "str" or (kind == "optional_str" and v is not None):
        if not isinstance(v, str):
            raise ConfigurationError(path, "expected a string", node.span)
        return v
    if kind == "optional_str":
        return None
    if not node.is_array:
        raise ConfigurationError(path, "expected an array", node.span)
    if kind == "floats":
        return tuple(_number(item, f"{path}[{i}]") for i, item in enumerate(v))
    pairs = []
    for i, item in enumerate(v):
        if not item.is_array or len(item.value) != 2:
            raise ConfigurationError(f"{path}[{i}]", "expected a [t, theta] pair", item.span)
        pairs.append(tuple(_number(x, f"{path}[{i}]") for x in item.value))
    return tuple(pairs)


def _build_section(name: str, cls, node: Node):
    if not node.is_object:
        raise ConfigurationError(name, "expected a section object", node.span)
    defaults = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, child in node.value.items():
        path = f"{name}.{key}"
        if key not in defaults:
            raise ConfigurationError(path, "unknown key", child.span)
        kwargs[key] = _coerce(_kind_of(path, defaults[key].default), child, path)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        span = node.value[exc.path].span if exc.path in node.value else node.span
        raise exc.prefixed(name).at(span) from None


def from_document(doc: Document) -> ExperimentConfig:
    """Map a parsed document onto an `ExperimentConfig` and cross-check it."""
    for name, node in doc.prolog.items():
        if name != "schema":
            raise ConfigurationError(f"${name}", "unknown directive", node.span)
        if node.value != SCHEMA:
            raise ConfigurationError("$schema", f"expected \"{SCHEMA}\"", node.span)

    if not doc.root.is_object:
        raise ConfigurationError("", "top level must be an object", doc.root.span)
    kwargs: Dict[str, Any] = {}
    for key, node in doc.root.value.items():
        if key in SECTIONS:
            kwargs[key] = _build_section(key, SECTIONS[key], node)
        elif key in ("controller", "output_dir"):
            kwargs[key] = _coerce("str", node, key)
        elif key == "seed":
            kwargs[key] = _coerce("int", node, key)
        else:
            raise ConfigurationError(key, "unknown key", node.span)
    try:
        cfg = ExperimentConfig(**kwargs)
    except ConfigurationError as exc:
        node = doc.root.value.get(exc.path)
        raise exc.at(node.span if node is not None else None) from None
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Checks that span several sections.

    Filter gains are checked against the observer and the metrics window
    against the horizon.
    """
    periods = cfg.sim.n_periods - window_start(cfg.metrics.transient_skip, cfg.sim.dt_ctrl)
    if periods < MIN_SAMPLES:
        raise ConfigurationError(
            "metrics.transient_skip",
            f"leaves {max(periods, 0)} control periods before sim.t_end={cfg.sim.t_end:g}, need {MIN_SAMPLES}")
    plant = acc_plant(cfg.acc)
    try:
        obs = acc_observer_config(cfg.acc, cfg.observer.Lr, cfg.filter)
    except ConfigurationError as exc:
        raise exc.prefixed("observer") from None
    rp = RobustnessParams.from_observer(cfg.filter.sigma, obs, plant)
    if not rp.alpha_d > 0.0:
        raise ConfigurationError("observer.Lr", f"gives alpha_d = {rp.alpha_d:.6g}, needs > 0")
    try:
        rp.check(dop_barrier(cfg.acc, cfg.filter.alpha))
    except ConfigurationError as exc:
        raise exc.prefixed("filter") from None


def apply_overrides(doc: Document, overrides: Iterable[str]) -> None:
    """Splice `dotted.path=value` assignments into the document in place."""
    for item in overrides:
        path, sep, text = item.partition('=')
        path = path.strip()
        if not sep or not path:
            raise ConfigurationError(item, "override must look like path=value")
        node = parse_value_str(text)
        try:
            set_path(doc, path, node)
        except ContractViolation as exc:
            raise ConfigurationError(path, str(exc)) from None


def load_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read, override and validate an experiment; no file means all defaults."""
    if path is None:
        doc = Document()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError("config", f"cannot read {path}: {exc.strerror}") from None
        doc = parse_str(text)
    apply_overrides(doc, overrides)
    cfg = from_document(doc)
    logger.debug("loaded configuration from %s", path or "defaults")
    return cfg


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_plain(cfg: ExperimentConfig) -> dict:
    return _plain(cfg)


def config_to_document(cfg: ExperimentConfig) -> Document:
    """Resolved configuration as a document that reads back to `cfg`."""
    return Document(prolog={"schema": Node(value=SCHEMA)}, root=from_plain(config_to_plain(cfg)))


def resolve_road(road: RoadConfig, seed: int, t_end: float) -> RoadProfile:
    """Road profile selected by the `road` section; `seed` drives random roads."""
    try:
        if road.kind == "three_section":
            return three_section_profile(road.rate_bound)
        if road.kind == "constant":
            return constant_road(road.theta, road.rate_bound)
        if road.kind == "random":
            return random_road(seed, t_end, road.rate_bound, road.knot_interval)
        if road.knots:
            return RoadProfile(kind="table", knots=road.knots, rate_bound=road.rate_bound)
        try:
            text = Path(road.file).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError("file", f"cannot read {road.file}: {exc.strerror}") from None
        return RoadProfile.from_table(text, road.rate_bound)
    except ConfigurationError as exc:
        raise exc.prefixed("road") from None
