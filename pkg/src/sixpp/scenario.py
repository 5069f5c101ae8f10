"""Scenario files: flat ``key = value`` pairs under ``[section]`` headers.

Every key is typed and has a default; unknown sections or keys are rejected
with the offending line and column.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from . import core
from .ctflood import CtFloodConfig
from .phy import CtTiming, PhyMode
from .schedule import (CtWindow, HoppingConfig, SlotframeLayout, build_layout,
                       build_minimal_layout)
from .tschmac import MacMode


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 source: str | None = None):
        self.line, self.column, self.source = line, column, source
        where = ""
        if line is not None:
            where = f"{source or '<scenario>'}:{line}:{column or 1}: "
        super().__init__(where + message)


Windows = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class RunSection:
    mode: str = "sixpp"
    seed: int = 1
    duration_ms: int = 120_000
    bootstrap: str = "boot"          # boot | formed
    app_enabled: bool = True
    app_period_ms: int = 5_000
    app_start_ms: int = 0
    app_drain_ms: int = 5_000


@dataclass(frozen=True)
class TopologySection:
    kind: str = "line"               # line | grid | rgg | edgelist
    nodes: int = 11
    rows: int = 0
    cols: int = 0
    prr: float = 0.9
    radius: float = 0.5
    max_diameter: int = 0            # rgg only; 0 disables the check
    topo_seed: int = 1
    path: str = ""


@dataclass(frozen=True)
class SlotframeSection:
    slot_us: int = 10_000
    sixpp_slots: int = 101
    baseline_slots: int = 1


@dataclass(frozen=True)
class CtSection:
    phy: str = "LE_2M"
    n_tx: int = 2
    n_h: int = 3
    payload_bytes: int = 64
    overhead_bytes: int = 6
    ramp_up_us: int = 40
    floods_per_frame: int = 2
    data_repeats: int = 2


@dataclass(frozen=True)
class HoppingSection:
    tsch_channels: tuple[int, ...] = tuple(range(11, 27))
    ct_channels: tuple[int, ...] = (37, 38, 39)
    tsch_offset: int = 0
    ct_offset: int = 0


@dataclass(frozen=True)
class MacSection:
    guard_us: int = 1_000
    eb_period_ms: int = 4_000
    ka_period_ms: int = 10_000
    drift_ppm: int = 40
    resync: bool = True
    max_retries: int = 7
    queue_limit: int = 64
    scan_dwell_slots: int = 100


@dataclass(frozen=True)
class RplSection:
    dao_delay_ms: int = 4_000


@dataclass(frozen=True)
class ReceptionSection:
    gamma_low: float = 1.0
    gamma_high: float = 0.9
    gamma_threshold: int = 3


@dataclass(frozen=True)
class JammerSection:
    enabled: bool = False
    channels: tuple[int, ...] = (15, 20, 38)
    jam_loss: float = 1.0
    windows: Windows = ()            # empty: active for the whole run


@dataclass(frozen=True)
class OutputSection:
    dir: str = ""
    trace_floods: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    run: RunSection = field(default_factory=RunSection)
    topology: TopologySection = field(default_factory=TopologySection)
    slotframe: SlotframeSection = field(default_factory=SlotframeSection)
    ct: CtSection = field(default_factory=CtSection)
    hopping: HoppingSection = field(default_factory=HoppingSection)
    mac: MacSection = field(default_factory=MacSection)
    rpl: RplSection = field(default_factory=RplSection)
    reception: ReceptionSection = field(default_factory=ReceptionSection)
    jammer: JammerSection = field(default_factory=JammerSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: str = field(default="", compare=False)

    # -- derived views -------------------------------------------------

    @property
    def mode(self) -> MacMode:
        return MacMode.parse(self.run.mode)

    @property
    def timing(self) -> CtTiming:
        c = self.ct
        return CtTiming(PhyMode.parse(c.phy), c.ramp_up_us, c.overhead_bytes, c.payload_bytes)

    def flood_config(self) -> CtFloodConfig:
        return CtFloodConfig(self.ct.n_tx, self.ct.n_h, self.timing, core.COORDINATOR)

    def ct_window(self) -> CtWindow:
        return CtWindow(self.ct.n_tx, self.ct.n_h, self.timing, self.ct.floods_per_frame)

    def layout(self) -> SlotframeLayout:
        sf = self.slotframe
        if self.mode is MacMode.SIXPP:
            return build_layout(sf.sixpp_slots, self.ct_window(), sf.slot_us)
        return build_minimal_layout(sf.baseline_slots, sf.slot_us)

    def hopping_config(self) -> HoppingConfig:
        h = self.hopping
        return HoppingConfig(h.tsch_channels, h.ct_channels, h.tsch_offset, h.ct_offset)

    def build_topology(self) -> core.Topology:
        t = self.topology
        if t.kind == "line":
            return core.make_line_topology(t.nodes, t.prr)
        if t.kind == "grid":
            return core.make_grid_topology(t.rows, t.cols, t.prr)
        if t.kind == "rgg":
            return _rgg_with_diameter(t)
        if t.kind == "edgelist":
            path = Path(t.path)
            if not path.is_absolute() and self.base_dir:
                path = Path(self.base_dir) / path
            return core.load_edge_list(path, t.nodes or None)
        raise ScenarioError(f"unknown topology kind {t.kind!r}")

    def with_overrides(self, **sections: dict[str, Any]) -> "ScenarioConfig":
        cfg = self
        for name, values in sections.items():
            cfg = dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **values)})
        return cfg

    def set(self, dotted: str, raw: str) -> "ScenarioConfig":
        """Override one ``section.key`` from its textual form."""
        if "." not in dotted:
            raise ScenarioError(f"override {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        ftype = _field_type(section, key)
        if ftype is None:
            raise ScenarioError(f"unknown key {dotted!r}")
        return self.with_overrides(**{section: {key: _convert(ftype, raw)}})

    def validate(self) -> None:
        """Raise :class:`ScenarioError` for anything the engine cannot run."""
        try:
            mode = self.mode
            self.timing
            self.hopping_config()
            self.layout()
            topo = self.build_topology()
        except (ValueError, OSError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc)) from None
        r = self.run
        if r.duration_ms <= 0 or r.app_period_ms <= 0:
            raise ScenarioError("durations must be positive")
        if r.bootstrap not in ("boot", "formed"):
            raise ScenarioError("run.bootstrap must be boot or formed")
        if self.slotframe.slot_us <= 0:
            raise ScenarioError("slot_us must be positive")
        if self.mac.guard_us <= 0 or self.mac.eb_period_ms <= 0 or self.mac.ka_period_ms <= 0:
            raise ScenarioError("MAC periods and guard must be positive")
        if not 0 <= self.mac.drift_ppm <= 200:
            raise ScenarioError("drift_ppm must be within [0, 200]")
        g = self.reception
        if not (0 <= g.gamma_high <= g.gamma_low <= 1):
            raise ScenarioError("capture gamma must satisfy 0 <= gamma_high <= gamma_low <= 1")
        if not 0 <= self.jammer.jam_loss <= 1:
            raise ScenarioError("jam_loss must be in [0, 1]")
        known = set(self.hopping.tsch_channels) | set(self.hopping.ct_channels)
        if self.jammer.enabled and not set(self.jammer.channels) <= known:
            raise ScenarioError("jammed channels must come from the TSCH or CT channel lists")
        if mode is MacMode.SIXPP and r.app_enabled and self.ct.floods_per_frame < 2:
            raise ScenarioError("sixpp data dissemination needs ct.floods_per_frame >= 2")
        if self.ct.data_repeats < 1:
            raise ScenarioError("ct.data_repeats must be >= 1")
        if mode is MacMode.SIXPP:
            ecc = topo.eccentricity(core.COORDINATOR)
            if ecc is None:
                raise ScenarioError("topology is disconnected from the coordinator")

    # -- text form -----------------------------------------------------

    def serialize(self) -> str:
        out = []
        for sec in _SECTIONS:
            out.append(f"[{sec}]")
            obj = getattr(self, sec)
            for f in dataclasses.fields(obj):
                out.append(f"{f.name} = {_format(getattr(obj, f.name))}")
            out.append("")
        return "\n".join(out)

    def config_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:12]


_SECTIONS = ("run", "topology", "slotframe", "ct", "hopping", "mac", "rpl",
             "reception", "jammer", "output")


def _rgg_with_diameter(t: TopologySection) -> core.Topology:
    # Redraw with successive seeds until the diameter bound holds.
    for k in range(1000):
        topo = core.make_random_geometric_topology(t.nodes, t.radius, t.prr, t.topo_seed + 7919 * k)
        if t.max_diameter <= 0:
            return topo
        diam = max(topo.eccentricity(i) for i in topo.nodes())
        if diam <= t.max_diameter:
            return topo
    raise ScenarioError("could not draw a random geometric graph within max_diameter")


def _section_type(section: str):
    for f in dataclasses.fields(ScenarioConfig):
        if f.name == section and section in _SECTIONS:
            return f.default_factory
    return None


def _field_type(section: str, key: str) -> str | None:
    cls = _section_type(section)
    if cls is None:
        return None
    for f in dataclasses.fields(cls):
        if f.name == key:
            return f.type if isinstance(f.type, str) else f.type.__name__
    return None


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(f"{a}-{b}" for a, b in value)
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(ftype: str, raw: str) -> Any:
    raw = raw.strip()
    if ftype == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if ftype == "int":
        return int(raw.replace("_", ""))
    if ftype == "float":
        return float(raw)
    if ftype == "str":
        return raw
    if ftype.startswith("tuple[int"):
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if ftype == "Windows":
        windows = []
        for part in raw.split(";"):
            part = part.strip()
            if not part:
                continue
            a, b = part.split("-")
            start, end = int(a), int(b)
            if end <= start:
                raise ValueError(f"window {part!r} must have end > start")
            windows.append((start, end))
        return tuple(windows)
    raise ValueError(f"unsupported field type {ftype}")


def parse_scenario(text: str, source: str | None = None, base_dir: str = "") -> ScenarioConfig:
    values: dict[str, dict[str, Any]] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        col = len(stripped) - len(stripped.lstrip()) + 1
        line = stripped.strip()
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("unterminated section header", lineno, col, source)
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ScenarioError(f"unknown section [{name}]", lineno, col + 1, source)
            section = name
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", lineno, col, source)
        if section is None:
            raise ScenarioError("key outside of any [section]", lineno, col, source)
        key, _, val = line.partition("=")
        key = key.strip()
        ftype = _field_type(section, key)
        if ftype is None:
            raise ScenarioError(f"unknown key {key!r} in [{section}]", lineno, col, source)
        if key in values[section]:
            raise ScenarioError(f"duplicate key {key!r}", lineno, col, source)
        vcol = stripped.index("=") + 2
        try:
            values[section][key] = _convert(ftype, val)
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key}: {exc}", lineno, vcol, source) from None
    cfg = ScenarioConfig(base_dir=base_dir)
    cfg = cfg.with_overrides(**values)
    return cfg


def bundled_scenarios() -> list[str]:
    root = resources.files("sixpp") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".scn"))


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    """Load a scenario file, or a bundled one by name (``dense20`` or ``dense20.scn``)."""
    path = Path(path_or_name)
    if path.exists():
        return parse_scenario(path.read_text(), str(path), str(path.parent.resolve()))
    name = path.name if path.name.endswith(".scn") else path.name + ".scn"
    res = resources.files("sixpp") / "scenarios" / name
    if str(path_or_name) == path.name or str(path_or_name) + ".scn" == name:
        if res.is_file():
            return parse_scenario(res.read_text(), name)
    raise ScenarioError(f"scenario not found: {path_or_name}")
