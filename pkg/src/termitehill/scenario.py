"""Scenario files: flat ``key = value`` lines, ``#`` comments, and an
optional ``[protocol]`` section holding protocol tunables.

Unset keys take the defaults of the reference evaluation profile below.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .network import EnergyConfig, MacConfig, RadioConfig
from .protocol import ProtocolParams, protocol_names

PROFILE_DIR = "profiles"

_SCALARS = {
    # key: (type, target)
    "name": (str, "name"),
    "protocol": (str, "protocol"),
    "area_width": (float, "area_width"),
    "area_height": (float, "area_height"),
    "nodes": (int, "nodes"),
    "placement": (str, "placement"),
    "traffic_rate": (float, "traffic_rate"),
    "sink_mode": (str, "sink_mode"),
    "sink_x": (float, "sink_x"),
    "sink_y": (float, "sink_y"),
    "t_change": (float, "t_change"),
    "duration": (float, "duration"),
    "replications": (int, "replications"),
    "base_seed": (int, "base_seed"),
}
_RADIO = {"range": float, "delivery_probability": float, "data_rate": float, "processing_delay": float}
_ENERGY = {"tx_joules_per_bit": float, "rx_joules_per_bit": float, "idle_joules_per_second": float,
           "initial_energy": float}
_MAC = {"max_retransmissions": int, "ack_timeout": float}


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    protocol: str = "termite-hill"
    area_width: float = 100.0
    area_height: float = 100.0
    nodes: int = 100
    placement: str = "random-connected"
    radio: RadioConfig = field(default_factory=RadioConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    traffic_rate: float = 0.1
    sources: tuple[int, ...] | None = None  # None: every non-sink node
    sink_mode: str = "static"
    sink_x: float = 50.0
    sink_y: float = 50.0
    t_change: float = 2.0
    duration: float = 360.0
    replications: int = 10
    base_seed: int = 1
    params: ProtocolParams = field(default_factory=ProtocolParams)

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.nodes < 2:
            raise ConfigError(f"nodes must be >= 2 (a source and the sink), got {self.nodes}")
        if not (self.area_width > 0 and self.area_height > 0):
            raise ConfigError("area dimensions must be > 0")
        if self.placement not in ("random", "random-connected"):
            raise ConfigError(f"placement must be random or random-connected, got {self.placement!r}")
        if self.protocol not in protocol_names():
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {protocol_names()}")
        if not self.traffic_rate > 0:
            raise ConfigError("traffic_rate must be > 0")
        if self.sink_mode not in ("static", "dynamic"):
            raise ConfigError(f"sink_mode must be static or dynamic, got {self.sink_mode!r}")
        if not (0 <= self.sink_x <= self.area_width and 0 <= self.sink_y <= self.area_height):
            raise ConfigError("sink position lies outside the area")
        if not self.t_change > 0:
            raise ConfigError("t_change must be > 0")
        if self.sources is not None:
            bad = [s for s in self.sources if not 1 <= s < self.nodes]
            if bad or not self.sources:
                raise ConfigError(f"sources must be non-sink node ids in 1..{self.nodes - 1}, got {bad or 'none'}")

    @property
    def area(self) -> tuple[float, float]:
        return (self.area_width, self.area_height)

    @property
    def source_ids(self) -> tuple[int, ...]:
        if self.sources is None:
            return tuple(range(1, self.nodes))
        return tuple(sorted(set(self.sources)))

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        """Render as a scenario file that loads back to an equal scenario."""
        lines = [f"name = {self.name}", f"protocol = {self.protocol}"]
        for key, (_, attr) in _SCALARS.items():
            if key in ("name", "protocol"):
                continue
            lines.append(f"{key} = {getattr(self, attr)}")
        srcs = "all" if self.sources is None else ",".join(map(str, self.sources))
        lines.append(f"sources = {srcs}")
        for group, obj in ((_RADIO, self.radio), (_ENERGY, self.energy), (_MAC, self.mac)):
            for key in group:
                lines.append(f"{key} = {getattr(obj, key)}")
        lines.append("")
        lines.append("[protocol]")
        for f in dataclasses.fields(ProtocolParams):
            v = getattr(self.params, f.name)
            lines.append(f"{f.name} = {'auto' if v is None else v}")
        return "\n".join(lines) + "\n"


def _convert(key: str, raw: str, typ):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, delimiters=("=",),
        default_section="__none__",
    )
    cp.optionxform = str
    try:
        cp.read_string("[scenario]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown_sections = set(cp.sections()) - {"scenario", "protocol"}
    if unknown_sections:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown_sections)}")

    top = dict(cp["scenario"])
    if "protocol" not in top:
        raise ConfigError(f"{source}: missing required key 'protocol'")
    kw: dict = {}
    radio, energy, mac = {}, {}, {}
    for key, raw in top.items():
        if key in _SCALARS:
            typ, attr = _SCALARS[key]
            kw[attr] = _convert(key, raw, typ)
        elif key == "area":
            try:
                w, h = (float(v) for v in raw.lower().replace("x", " ").split())
            except ValueError:
                raise ConfigError(f"area: expected 'W x H', got {raw!r}") from None
            kw["area_width"], kw["area_height"] = w, h
        elif key == "sources":
            if raw.strip().lower() == "all":
                kw["sources"] = None
            else:
                kw["sources"] = tuple(_convert(key, v.strip(), int) for v in raw.split(",") if v.strip())
        elif key in _RADIO:
            radio[key] = _convert(key, raw, _RADIO[key])
        elif key in _ENERGY:
            energy[key] = _convert(key, raw, _ENERGY[key])
        elif key in _MAC:
            mac[key] = _convert(key, raw, _MAC[key])
        else:
            raise ConfigError(f"{source}: unknown key {key!r}")

    pkw = {}
    if cp.has_section("protocol"):
        types = {f.name: f.type for f in dataclasses.fields(ProtocolParams)}
        for key, raw in cp["protocol"].items():
            if key not in types:
                raise ConfigError(f"{source}: unknown protocol parameter {key!r}")
            default = getattr(ProtocolParams, key, None)
            if key == "gamma_max":
                pkw[key] = None if raw.strip().lower() in ("auto", "none", "") else _convert(key, raw, float)
            elif isinstance(default, bool):
                pkw[key] = raw.strip().lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                pkw[key] = _convert(key, raw, int)
            elif isinstance(default, float):
                pkw[key] = _convert(key, raw, float)
            else:
                pkw[key] = raw.strip()
    try:
        return Scenario(
            radio=RadioConfig(**radio), energy=EnergyConfig(**energy), mac=MacConfig(**mac),
            params=ProtocolParams(**pkw), **kw,
        )
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def shipped_profiles() -> list[str]:
    root = resources.files("termitehill") / PROFILE_DIR
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Load a scenario file, or a shipped profile by name (e.g. ``table1-static``)."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_scenario(path.read_text(), str(path))
    name = path.name[:-4] if path.name.endswith(".scn") else path.name
    res = resources.files("termitehill") / PROFILE_DIR / f"{name}.scn"
    if res.is_file():
        return parse_scenario(res.read_text(), f"profile:{name}")
    raise ConfigError(f"no scenario file or shipped profile named {str(path_or_name)!r} "
                      f"(profiles: {', '.join(shipped_profiles())})")
