"""Scenario configuration: every tunable of a benchmark run in one validated record.

Configs are read from INI-style documents (flat ``key = value`` sections,
see `load_config`) and are immutable after validation, so a single config
can be shared by concurrently executing runs.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace

DAY = 86_400.0
HOUR = 3_600.0

PROTOCOLS = ("epidemic", "prophet", "bubblerap")

PERSON = "person"
BUS = "bus"
PATROL = "patrol"
GROUP_KINDS = (PERSON, BUS, PATROL)


class ConfigError(Exception):
    """A config document is syntactically malformed."""


class ValidationError(Exception):
    """A parsed config violates a named invariant."""


@dataclass(frozen=True)
class RadioConfig:
    range_m: float = 100.0
    bandwidth_bps: float = 11e6  # Mbps convention: 10^6 bits/s
    beacon_interval: float = 1.0


@dataclass(frozen=True)
class TrafficConfig:
    messages_per_day: int = 500
    pair_count: int = 50
    size_min: int = 1_000  # kilobyte convention: 1 kB = 1000 bytes
    size_max: int = 100_000
    ttl: float = 24 * HOUR
    buffer_capacity: int = 2_000_000


@dataclass(frozen=True)
class ProtocolParams:
    """Tunables for all protocols; the active one is picked by name.

    The predictability constants are the protocol's published ones; the
    aging unit is scaled so the decay horizon (half-life ~2.4 h) matches
    this scenario's daily encounter rhythm. The familiar threshold sits at
    the scale the community protocol's own evaluations used for
    months-long human-mobility datasets (days of cumulative contact).
    """

    # delivery-predictability (encounter history) protocol
    p_init: float = 0.75
    beta: float = 0.25
    gamma: float = 0.98
    aging_unit: float = 300.0
    # community / centrality protocol
    familiar_threshold: float = 108 * HOUR
    merge_fraction: float = 0.5
    centrality_window: float = 6 * HOUR
    window_count: int = 2


@dataclass(frozen=True)
class GroupSpec:
    name: str
    kind: str
    size: int
    speed_min: float
    speed_max: float
    pause_min: float
    pause_max: float
    route: int = -1  # bus groups: index into the map's bus routes (-1 = auto)
    # person-group fields (ignored for vehicles)
    evening_prob: float = 0.5
    office_stay: float = 8 * HOUR
    work_start_min: float = 7 * HOUR
    work_start_max: float = 9 * HOUR
    evening_min: float = 1 * HOUR
    evening_max: float = 2 * HOUR
    evening_group_max: int = 3


def person_group(name: str, size: int) -> GroupSpec:
    return GroupSpec(name, PERSON, size, speed_min=0.8, speed_max=1.4,
                     pause_min=60.0, pause_max=4 * HOUR)


def bus_group(name: str, size: int = 2, route: int = -1) -> GroupSpec:
    return GroupSpec(name, BUS, size, speed_min=7.0, speed_max=10.0,
                     pause_min=10.0, pause_max=30.0, route=route)


def patrol_group(name: str, size: int) -> GroupSpec:
    return GroupSpec(name, PATROL, size, speed_min=7.0, speed_max=10.0,
                     pause_min=100.0, pause_max=300.0)


def default_groups() -> tuple[GroupSpec, ...]:
    groups = [patrol_group("patrol", 10)]
    groups += [bus_group(f"bus{i}", 2, route=i) for i in range(8)]
    # people total 124, split 4x15 + 4x16 (fixed for determinism)
    sizes = [15, 15, 15, 15, 16, 16, 16, 16]
    groups += [person_group(f"people{i}", s) for i, s in enumerate(sizes)]
    return tuple(groups)


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 150
    group_specs: tuple[GroupSpec, ...] = field(default_factory=default_groups)
    world_width: float = 4_500.0
    world_height: float = 3_400.0
    sim_duration: float = 12 * DAY
    warmup: float = 2 * DAY
    tick: float = 1.0
    runs: int = 10
    base_seed: int = 1
    radio: RadioConfig = field(default_factory=RadioConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    protocol: str = "epidemic"
    protocol_params: ProtocolParams = field(default_factory=ProtocolParams)

    def node_ids(self) -> list[int]:
        return list(range(self.node_count))


def default_scenario() -> ScenarioConfig:
    """The canonical benchmark scenario: 150 nodes in 17 groups."""
    cfg = ScenarioConfig()
    validate(cfg)
    return cfg


def derive_seed(base_seed: int, tag: str) -> int:
    """Stable sub-seed so map/pairs/schedule streams stay decoupled from run seeds."""
    digest = hashlib.sha256(f"{base_seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def map_seed(cfg: ScenarioConfig) -> int:
    return derive_seed(cfg.base_seed, "map")


def pair_seed(cfg: ScenarioConfig) -> int:
    return derive_seed(cfg.base_seed, "pairs")


def schedule_seed(cfg: ScenarioConfig) -> int:
    return derive_seed(cfg.base_seed, "traffic")


def _fail(invariant: str) -> None:
    raise ValidationError(invariant)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every invariant; raises ValidationError naming the violated one."""
    if cfg.node_count <= 0:
        _fail("node_count must be positive")
    total = sum(g.size for g in cfg.group_specs)
    if total != cfg.node_count:
        _fail(f"group sizes must sum to node_count ({total} != {cfg.node_count})")
    if not cfg.group_specs:
        _fail("at least one group is required")
    if cfg.world_width <= 0 or cfg.world_height <= 0:
        _fail("world dimensions must be positive")
    if cfg.tick <= 0:
        _fail("tick must be positive")
    if not cfg.warmup < cfg.sim_duration:
        _fail("warmup must be shorter than sim_duration")
    if cfg.warmup < 0:
        _fail("warmup must be non-negative")
    if cfg.runs < 1:
        _fail("runs must be >= 1")

    r = cfg.radio
    if r.range_m <= 0:
        _fail("radio range must be positive")
    if r.bandwidth_bps <= 0:
        _fail("radio bandwidth must be positive")
    if r.beacon_interval < cfg.tick:
        _fail("beacon_interval must be >= tick")
    ratio = r.beacon_interval / cfg.tick
    if abs(ratio - round(ratio)) > 1e-9:
        _fail("beacon_interval must be an integer multiple of tick")

    t = cfg.traffic
    if t.messages_per_day < 0:
        _fail("messages_per_day must be non-negative")
    if t.pair_count < 0:
        _fail("pair_count must be non-negative")
    if not 0 < t.size_min <= t.size_max:
        _fail("message sizes must satisfy 0 < size_min <= size_max")
    if t.ttl <= 0:
        _fail("ttl must be positive")
    if t.buffer_capacity < t.size_max:
        _fail("buffer_capacity must be >= size_max "
              "(a max-size message would be undeliverable)")

    names = set()
    for g in cfg.group_specs:
        if g.kind not in GROUP_KINDS:
            _fail(f"unknown group kind '{g.kind}' in group '{g.name}'")
        if g.name in names:
            _fail(f"duplicate group name '{g.name}'")
        names.add(g.name)
        if g.size <= 0:
            _fail(f"group '{g.name}' size must be positive")
        if not 0 < g.speed_min <= g.speed_max:
            _fail(f"group '{g.name}' speed range invalid")
        if not 0 <= g.pause_min <= g.pause_max:
            _fail(f"group '{g.name}' pause range invalid")
        if g.kind == PERSON:
            if not 0 <= g.evening_prob <= 1:
                _fail(f"group '{g.name}' evening_prob must be in [0, 1]")
            if g.office_stay <= 0:
                _fail(f"group '{g.name}' office_stay must be positive")
            if not 0 <= g.work_start_min <= g.work_start_max < DAY:
                _fail(f"group '{g.name}' work start window invalid")
            if not 0 < g.evening_min <= g.evening_max:
                _fail(f"group '{g.name}' evening duration range invalid")
            if g.evening_group_max < 1:
                _fail(f"group '{g.name}' evening_group_max must be >= 1")

    if cfg.protocol not in PROTOCOLS:
        _fail(f"unknown protocol '{cfg.protocol}' (valid: {', '.join(PROTOCOLS)})")
    p = cfg.protocol_params
    if not 0 < p.p_init <= 1:
        _fail("p_init must be in (0, 1]")
    if not 0 <= p.beta <= 1:
        _fail("beta must be in [0, 1]")
    if not 0 < p.gamma < 1:
        _fail("gamma must be in (0, 1)")
    if p.aging_unit <= 0:
        _fail("aging_unit must be positive")
    if p.familiar_threshold <= 0:
        _fail("familiar_threshold must be positive")
    if not 0 < p.merge_fraction < 1:
        _fail("merge_fraction must be in (0, 1)")
    if p.centrality_window <= 0:
        _fail("centrality_window must be positive")
    if p.window_count < 1:
        _fail("window_count must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# INI serialization

_SCENARIO_KEYS = ("node_count", "world_width", "world_height", "sim_duration",
                  "warmup", "tick", "runs", "base_seed")
_RADIO_KEYS = ("range_m", "bandwidth_bps", "beacon_interval")
_TRAFFIC_KEYS = ("messages_per_day", "pair_count", "size_min", "size_max",
                 "ttl", "buffer_capacity")
_PROTOCOL_KEYS = ("p_init", "beta", "gamma", "aging_unit", "familiar_threshold",
                  "merge_fraction", "centrality_window", "window_count")
_GROUP_KEYS = ("kind", "size", "speed_min", "speed_max", "pause_min", "pause_max",
               "route", "evening_prob", "office_stay", "work_start_min",
               "work_start_max", "evening_min", "evening_max", "evening_group_max")


def _parse_value(raw: str, target_type: type):
    raw = raw.strip()
    if target_type is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"expected integer, got '{raw}'") from exc
    if target_type is float:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"expected number, got '{raw}'") from exc
    return raw


def _apply_section(obj, section: configparser.SectionProxy, keys, label: str):
    type_of = {f.name: f.type for f in fields(obj)}
    updates = {}
    for key in section:
        if key not in keys:
            raise ConfigError(f"unknown key '{key}' in section [{label}]")
        ftype = int if type_of[key] == "int" else (float if type_of[key] == "float" else str)
        try:
            updates[key] = _parse_value(section[key], ftype)
        except ConfigError as exc:
            raise ConfigError(f"[{label}] {key}: {exc}") from exc
    return replace(obj, **updates) if updates else obj


def load_config(text: str) -> ScenarioConfig:
    """Parse an INI document into a validated ScenarioConfig.

    Omitted keys take the canonical default-scenario values; an empty
    document yields the default scenario itself. Group sections
    ([group:NAME]) replace the entire default group list when present.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from exc

    cfg = ScenarioConfig()
    scalar_updates = {}
    group_sections = []
    for section in parser.sections():
        if section == "scenario":
            sec = parser[section]
            for key in sec:
                if key not in _SCENARIO_KEYS and key != "protocol":
                    raise ConfigError(f"unknown key '{key}' in section [scenario]")
            for key in _SCENARIO_KEYS:
                if key in sec:
                    ftype = int if key in ("node_count", "runs", "base_seed") else float
                    scalar_updates[key] = _parse_value(sec[key], ftype)
            if "protocol" in sec:
                scalar_updates["protocol"] = sec["protocol"].strip()
        elif section == "radio":
            cfg = replace(cfg, radio=_apply_section(cfg.radio, parser[section],
                                                    _RADIO_KEYS, "radio"))
        elif section == "traffic":
            cfg = replace(cfg, traffic=_apply_section(cfg.traffic, parser[section],
                                                      _TRAFFIC_KEYS, "traffic"))
        elif section == "protocol":
            sec = parser[section]
            if "name" in sec:
                scalar_updates["protocol"] = sec["name"].strip()
            pruned = {k: v for k, v in sec.items() if k != "name"}
            params = cfg.protocol_params
            type_of = {f.name: f.type for f in fields(params)}
            updates = {}
            for key, raw in pruned.items():
                if key not in _PROTOCOL_KEYS:
                    raise ConfigError(f"unknown key '{key}' in section [protocol]")
                ftype = int if type_of[key] == "int" else float
                updates[key] = _parse_value(raw, ftype)
            if updates:
                cfg = replace(cfg, protocol_params=replace(params, **updates))
        elif section.startswith("group:"):
            group_sections.append(section)
        else:
            raise ConfigError(f"unknown section [{section}]")

    if group_sections:
        groups = []
        for section in group_sections:
            name = section[len("group:"):].strip()
            sec = parser[section]
            if "kind" not in sec:
                raise ConfigError(f"[{section}] missing required key 'kind'")
            kind = sec["kind"].strip()
            if kind == PERSON:
                g = person_group(name, 0)
            elif kind == BUS:
                g = bus_group(name, 0)
            elif kind == PATROL:
                g = patrol_group(name, 0)
            else:
                raise ValidationError(f"unknown group kind '{kind}' in group '{name}'")
            ok_keys = set(_GROUP_KEYS)
            updates = {}
            type_of = {f.name: f.type for f in fields(g)}
            for key in sec:
                if key == "kind":
                    continue
                if key not in ok_keys:
                    raise ConfigError(f"unknown key '{key}' in section [{section}]")
                ftype = int if type_of[key] == "int" else float
                updates[key] = _parse_value(sec[key], ftype)
            groups.append(replace(g, **updates))
        cfg = replace(cfg, group_specs=tuple(groups))

    if scalar_updates:
        cfg = replace(cfg, **scalar_updates)
    return validate(cfg)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical INI text for a config; load_config(dump_config(c)) == c."""
    out = io.StringIO()
    out.write("[scenario]\n")
    for key in _SCENARIO_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg, key))}\n")
    out.write(f"protocol = {cfg.protocol}\n")
    out.write("\n[radio]\n")
    for key in _RADIO_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg.radio, key))}\n")
    out.write("\n[traffic]\n")
    for key in _TRAFFIC_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg.traffic, key))}\n")
    out.write("\n[protocol]\n")
    out.write(f"name = {cfg.protocol}\n")
    for key in _PROTOCOL_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg.protocol_params, key))}\n")
    for g in cfg.group_specs:
        out.write(f"\n[group:{g.name}]\n")
        for key in _GROUP_KEYS:
            out.write(f"{key} = {_fmt(getattr(g, key))}\n")
    return out.getvalue()


def apply_overrides(cfg: ScenarioConfig, overrides: dict[str, str]) -> ScenarioConfig:
    """Apply dotted-key overrides (e.g. 'traffic.pair_count=0') onto a config."""
    by_section: dict[str, dict[str, str]] = {}
    for dotted, value in overrides.items():
        if "." not in dotted:
            raise ConfigError(f"override key '{dotted}' must look like section.key")
        section, key = dotted.split(".", 1)
        by_section.setdefault(section, {})[key] = value

    text_parser = configparser.ConfigParser(interpolation=None)
    text_parser.read_string(dump_config(cfg))
    for section, kv in by_section.items():
        if not text_parser.has_section(section):
            raise ConfigError(f"override targets unknown section [{section}]")
        for key, value in kv.items():
            text_parser.set(section, key, value)
    buf = io.StringIO()
    text_parser.write(buf)
    return load_config(buf.getvalue())
