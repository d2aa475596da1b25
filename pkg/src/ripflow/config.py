"""Pipeline configuration: one TOML file with a section per stage.

Relative paths inside the file resolve against the file's own directory,
so config and data can move together. Unknown sections or keys are
rejected rather than ignored; a silently dropped typo ("gama = 10") is
worse than an error. The effective configuration, defaults included, is
echoed into the artifact directory as TOML for provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .errors import ConfigError
from .optflow import FlowConfig, FlowMethod


@dataclass
class InputConfig:
    frames_dir: Path = Path("frames")
    pattern: str = "*.png"
    frame_interval: float = 1.0


@dataclass
class MaskConfig:
    """Mask sources.

    shore_source: "threshold" (heuristic) or "external" (shore_path).
    wave_source: "auto" picks HSV thresholds on color frames and no wave
    mask on grayscale; "hsv", "external" (wave_path) and "none" force the
    respective behavior.
    """

    shore_source: str = "threshold"
    shore_path: Path | None = None
    wave_source: str = "auto"
    wave_path: Path | None = None
    s_max: float = 0.25
    v_min: float = 0.70

    def __post_init__(self) -> None:
        if self.shore_source not in ("threshold", "external"):
            raise ConfigError(f"shore_source must be threshold|external, got {self.shore_source!r}")
        if self.shore_source == "external" and self.shore_path is None:
            raise ConfigError("shore_source = external requires shore_path")
        if self.wave_source not in ("auto", "hsv", "external", "none"):
            raise ConfigError(
                f"wave_source must be auto|hsv|external|none, got {self.wave_source!r}"
            )
        if self.wave_source == "external" and self.wave_path is None:
            raise ConfigError("wave_source = external requires wave_path")
        if not 0 <= self.s_max <= 1 or not 0 <= self.v_min <= 1:
            raise ConfigError("s_max and v_min must lie in [0, 1]")


@dataclass
class GeometryConfig:
    gauss_sigma: float = 2.0
    canny_lo: float = 0.1
    canny_hi: float = 0.3

    def __post_init__(self) -> None:
        if self.gauss_sigma < 0:
            raise ConfigError("gauss_sigma must be >= 0")
        if not 0 < self.canny_lo < self.canny_hi <= 1:
            raise ConfigError("need 0 < canny_lo < canny_hi <= 1")


@dataclass
class DetectConfig:
    t_fields: int = 20
    stride: int = 1
    speed_eps: float = 0.0

    def __post_init__(self) -> None:
        if self.t_fields < 1 or self.stride < 1:
            raise ConfigError("T and stride must be >= 1")
        if self.speed_eps < 0:
            raise ConfigError("speed_eps must be >= 0")


@dataclass
class EvalConfig:
    gt_path: Path | None = None
    plot: bool = False


@dataclass
class VizConfig:
    quiver: bool = False
    quiver_block: int = 16
    quiver_scale: float = 8.0
    colormap: str = "hot"

    def __post_init__(self) -> None:
        if self.quiver_block < 1:
            raise ConfigError("quiver_block must be >= 1")


@dataclass
class RunConfig:
    out_dir: Path = Path("out")
    save_flow: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass
class PipelineConfig:
    input: InputConfig = field(default_factory=InputConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    masks: MaskConfig = field(default_factory=MaskConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    viz: VizConfig = field(default_factory=VizConfig)
    run: RunConfig = field(default_factory=RunConfig)


# TOML key -> dataclass field, where they differ.
_KEY_ALIASES = {
    ("detect", "T"): "t_fields",
}

_SECTIONS = {
    "input": InputConfig,
    "flow": FlowConfig,
    "masks": MaskConfig,
    "geometry": GeometryConfig,
    "detect": DetectConfig,
    "eval": EvalConfig,
    "viz": VizConfig,
    "run": RunConfig,
}

_PATH_KEYS = {
    ("input", "frames_dir"),
    ("masks", "shore_path"),
    ("masks", "wave_path"),
    ("eval", "gt_path"),
    ("run", "out_dir"),
}


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline TOML file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    base = path.parent
    sections = {}
    for name, raw in data.items():
        cls = _SECTIONS.get(name)
        if cls is None:
            raise ConfigError(f"unknown config section [{name}] in {path}")
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table in {path}")
        kwargs = {}
        valid_fields = set(cls.__dataclass_fields__)
        for key, value in raw.items():
            attr = _KEY_ALIASES.get((name, key), key)
            if attr not in valid_fields:
                raise ConfigError(f"unknown key {key!r} in section [{name}] of {path}")
            if (name, attr) in _PATH_KEYS and value is not None:
                value = Path(value)
                if not value.is_absolute():
                    value = base / value
            kwargs[attr] = value
        try:
            sections[name] = cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value in section [{name}] of {path}: {exc}") from exc
    return PipelineConfig(**sections)


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        # TOML floats need a decimal point or exponent.
        if "." not in text and "e" not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(value, FlowMethod):
        value = value.value
    if isinstance(value, Path):
        value = str(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize config value {value!r}")


def effective_toml(cfg: PipelineConfig) -> str:
    """Full configuration, defaults included, as a TOML document."""
    lines: list[str] = []
    for name, cls in _SECTIONS.items():
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for attr in cls.__dataclass_fields__:
            value = getattr(section, attr)
            if value is None:
                continue
            key = "T" if (name, attr) == ("detect", "t_fields") else attr
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    return "\n".join(lines)


def write_effective(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(effective_toml(cfg))
