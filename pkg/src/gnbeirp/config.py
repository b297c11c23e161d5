"""
Scenario files: YAML with the sections ``panel``, ``codebook``, ``grid``,
``ssb``, ``nulling``, ``channel`` and ``link``, plus top-level ``name`` and
``output_dir``. Every section is optional and falls back to the built-in
defaults. Unknown keys are rejected; errors carry the offending line.

Example::

    name: fig8
    panel: {n1: 4, n2: 4}
    codebook: {n1: 4, n2: 4, rank: 2}
    grid: {resolution: 1.0, reference: per-pattern-peak}
    ssb: {preset: ssb-332}
    nulling:
      - {theta_i: 6, phi_i: 5, epsilon_db: -17}
    channel: {model: tdl-c, delay_spread_ns: 300}
    link: {modulation: 16QAM, snr_db: [0, 4, 8], n_drops: 100, policy: pmi-subset}
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

import yaml

from .codebook import CodebookConfig
from .errors import ConfigError
from .geometry import ElementPattern, PanelConfig
from .linksim import ChannelConfig, LinkConfig
from .nulling import NullingRequest
from .radiation import REFERENCES, AngularGrid, SsbBeam, ssb_preset

SECTIONS = ("name", "output_dir", "panel", "codebook", "grid", "ssb", "nulling", "channel", "link")

_PANEL_KEYS = {f.name for f in fields(PanelConfig)}
_ELEMENT_KEYS = {f.name for f in fields(ElementPattern)}
_CODEBOOK_KEYS = {f.name for f in fields(CodebookConfig)}
_GRID_KEYS = {"resolution", "theta_range", "phi_range", "reference", "tx_power_dbm"}
_SSB_KEYS = {"preset", "angles", "columns", "index"}
_NULLING_KEYS = {f.name for f in fields(NullingRequest)}
_CHANNEL_KEYS = {f.name for f in fields(ChannelConfig)}
# file key -> LinkConfig field
_LINK_KEYS = {
    "modulation": "modulation", "n_layers": "n_layers", "n_tx": "n_tx", "n_rx": "n_rx",
    "snr_db": "snr_db_grid", "n_drops": "n_drops", "policy": "precoder_policy",
    "csi": "csi", "pilot_spacing": "pilot_spacing", "seed": "seed",
    "n_subcarriers": "n_subcarriers", "subcarrier_spacing_hz": "subcarrier_spacing_hz",
    "symbols_per_drop": "symbols_per_drop", "pmi_subcarrier_step": "pmi_subcarrier_step",
    "subset": None,
}


@dataclass
class Scenario:
    name: str = "scenario"
    panel: PanelConfig = field(default_factory=PanelConfig)
    codebook: CodebookConfig = field(default_factory=CodebookConfig)
    grid: AngularGrid = field(default_factory=AngularGrid.uniform)
    reference: str = "global-max"
    tx_power_dbm: float = 0.0
    ssb: list = field(default_factory=lambda: ssb_preset("ssb-332"))
    ssb_index: int | None = None
    nulling: list = field(default_factory=list)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    link: LinkConfig | None = None
    link_subset: int = 0
    output_dir: str | None = None
    config_hash: str = ""


# -- YAML with line numbers ------------------------------------------------

def _plain(node, lines, path):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1)
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _plain(v, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return yaml.SafeLoader(" ").construct_object(node)


def parse(text: str):
    """YAML text -> (mapping, {key path: line})."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    lines = {}
    if node is None:
        return {}, lines
    data = _plain(node, lines, ())
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1)
    return data, lines


# -- validation ------------------------------------------------------------

class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def line(self, *path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def mapping(self, value, allowed, *path):
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ConfigError(f"section {'.'.join(map(str, path))} must be a mapping",
                              self.line(*path))
        for key in value:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in {'.'.join(map(str, path))}",
                                  self.line(*path, key))
        return value

    def build(self, factory, kwargs, *path):
        try:
            return factory(**kwargs)
        except (ConfigError, ValueError, TypeError) as exc:
            msg = str(exc).split(": ", 1)[1] if getattr(exc, "line", None) else str(exc)
            raise ConfigError(msg, self.line(*path)) from None


def _pair(ctx, value, *path):
    if not (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError("expected a [low, high] pair of numbers", ctx.line(*path))
    return float(value[0]), float(value[1])


def _panel(ctx, raw):
    sec = dict(ctx.mapping(raw, _PANEL_KEYS, "panel"))
    if "element" in sec:
        el = ctx.mapping(sec["element"], _ELEMENT_KEYS, "panel", "element")
        sec["element"] = ctx.build(ElementPattern, el, "panel", "element")
    return ctx.build(PanelConfig, sec, "panel")


def _grid(ctx, raw):
    sec = ctx.mapping(raw, _GRID_KEYS, "grid")
    kwargs = {}
    for key in ("theta_range", "phi_range"):
        if key in sec:
            kwargs[key] = _pair(ctx, sec[key], "grid", key)
    if "resolution" in sec:
        kwargs["resolution"] = sec["resolution"]
    grid = ctx.build(AngularGrid.uniform, kwargs, "grid")
    reference = sec.get("reference", "global-max")
    if reference not in REFERENCES:
        raise ConfigError(f"unknown reference {reference!r}; expected one of {REFERENCES}",
                          ctx.line("grid", "reference"))
    return grid, reference, float(sec.get("tx_power_dbm", 0.0))


def _ssb(ctx, raw):
    sec = ctx.mapping(raw, _SSB_KEYS, "ssb")
    if "preset" in sec and "angles" in sec:
        raise ConfigError("give either ssb.preset or ssb.angles", ctx.line("ssb"))
    if "angles" in sec:
        angles = sec["angles"]
        if not isinstance(angles, list) or not angles:
            raise ConfigError("ssb.angles must be a non-empty list", ctx.line("ssb", "angles"))
        angles = [_pair(ctx, a, "ssb", "angles", i) for i, a in enumerate(angles)]
    else:
        angles = sec.get("preset", "ssb-332")
    beams = ctx.build(ssb_preset, {"name_or_angles": angles}, "ssb")
    if "columns" in sec:
        cols = sec["columns"]
        if not isinstance(cols, list) or not all(isinstance(c, int) for c in cols):
            raise ConfigError("ssb.columns must be a list of integers", ctx.line("ssb", "columns"))
        beams = [SsbBeam(b.steer_theta_deg, b.steer_phi_deg, tuple(cols)) for b in beams]
    index = sec.get("index")
    if index is not None and not (isinstance(index, int) and 0 <= index < len(beams)):
        raise ConfigError(f"ssb.index must lie in [0, {len(beams)})", ctx.line("ssb", "index"))
    return beams, index


def _nulling(ctx, raw):
    if raw is None:
        return []
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for i, item in enumerate(items):
        path = ("nulling", i) if isinstance(raw, list) else ("nulling",)
        sec = ctx.mapping(item, _NULLING_KEYS, *path)
        out.append(ctx.build(NullingRequest, sec, *path))
    return out


def _link(ctx, raw, codebook, n_nulling):
    if raw is None:
        return None, 0
    sec = ctx.mapping(raw, set(_LINK_KEYS), "link")
    kwargs = {_LINK_KEYS[k]: v for k, v in sec.items() if _LINK_KEYS[k]}
    if "snr_db_grid" in kwargs and not isinstance(kwargs["snr_db_grid"], list):
        raise ConfigError("link.snr_db must be a list", ctx.line("link", "snr_db"))
    kwargs.setdefault("n_tx", codebook.ports)
    kwargs.setdefault("n_layers", codebook.rank)
    link = ctx.build(LinkConfig, kwargs, "link")
    if link.precoder_policy != "svd" and (link.n_tx != codebook.ports
                                          or link.n_layers != codebook.rank):
        raise ConfigError("PMI policies need n_tx and n_layers to match the codebook",
                          ctx.line("link"))
    subset = sec.get("subset", 0)
    if link.precoder_policy == "pmi-subset" and not (isinstance(subset, int)
                                                     and 0 <= subset < n_nulling):
        raise ConfigError("pmi-subset needs link.subset to index a nulling entry",
                          ctx.line("link", "subset") or ctx.line("link"))
    return link, subset


def load_text(text: str) -> Scenario:
    data, lines = parse(text)
    ctx = _Ctx(lines)
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}", ctx.line(key))
    panel = _panel(ctx, data.get("panel"))
    codebook = ctx.build(CodebookConfig, ctx.mapping(data.get("codebook"), _CODEBOOK_KEYS,
                                                     "codebook"), "codebook")
    if (codebook.n1, codebook.n2) != (panel.n1, panel.n2) or panel.polarizations != 2:
        raise ConfigError("codebook (n1, n2) must match a dual-polarized panel",
                          ctx.line("codebook"))
    grid, reference, tx_power = _grid(ctx, data.get("grid"))
    ssb, ssb_index = _ssb(ctx, data.get("ssb"))
    nulling = _nulling(ctx, data.get("nulling"))
    for i, req in enumerate(nulling):
        if not grid.contains(req.theta_i, req.phi_i):
            raise ConfigError("protected direction outside the grid", ctx.line("nulling", i))
    channel = ctx.build(ChannelConfig, ctx.mapping(data.get("channel"), _CHANNEL_KEYS,
                                                   "channel"), "channel")
    link, subset = _link(ctx, data.get("link"), codebook, len(nulling))
    name = data.get("name", "scenario")
    output_dir = data.get("output_dir")
    return Scenario(str(name), panel, codebook, grid, reference, tx_power, ssb, ssb_index,
                    nulling, channel, link, subset,
                    None if output_dir is None else str(output_dir),
                    hashlib.sha256(text.encode()).hexdigest())


def load(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return load_text(text)
