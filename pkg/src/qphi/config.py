"""Flat key-value config files mirroring the extraction and simulation settings.

Format: one ``key = value`` pair per line, ``#`` comments. Keys are the field
names of ExtractionConfig and SimConfig plus ``fit_lo``/``fit_hi`` for the
exponent fit range. CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import QphiError
from .extraction import ExtractionConfig
from .model import DEFAULT_FIT_RANGE
from .simulate import SimConfig

_EXTRACTION_FIELDS = {f.name: f.type for f in dataclasses.fields(ExtractionConfig)}
_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}
_EXTRA_FIELDS = ("fit_lo", "fit_hi", "bins", "split_threshold_v")

KNOWN_KEYS = tuple(_EXTRACTION_FIELDS) + tuple(_SIM_FIELDS) + _EXTRA_FIELDS


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines into a string mapping."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise QphiError(f"config line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise QphiError(f"config line {line_no}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def load_config_file(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _coerce(key: str, value: str):
    if value.lower() in ("none", ""):
        return None
    if key in ("plateau_min_points", "refine_passes", "flux_steps", "bins"):
        return int(value)
    return float(value)


@dataclasses.dataclass
class RunSettings:
    """Effective settings for one command run: configs plus fit range and binning."""

    extraction: ExtractionConfig
    sim: SimConfig
    fit_range: tuple[float, float] = DEFAULT_FIT_RANGE
    bins: int | None = None
    split_threshold_v: float | None = None

    def to_dict(self) -> dict:
        return {
            "extraction": dataclasses.asdict(self.extraction),
            "sim": dataclasses.asdict(self.sim),
            "fit_range": list(self.fit_range),
            "bins": self.bins,
            "split_threshold_v": self.split_threshold_v,
        }


def build_settings(values: dict[str, str]) -> RunSettings:
    """Build effective settings from string key-value pairs over the defaults."""
    extraction_kwargs = {}
    sim_kwargs = {}
    fit_lo, fit_hi = DEFAULT_FIT_RANGE
    bins = None
    split_threshold = None
    for key, value in values.items():
        coerced = _coerce(key, value)
        if key in _EXTRACTION_FIELDS:
            extraction_kwargs[key] = coerced
        elif key in _SIM_FIELDS:
            if key == "seed":
                coerced = int(float(value))
            sim_kwargs[key] = coerced
        elif key == "fit_lo":
            fit_lo = coerced
        elif key == "fit_hi":
            fit_hi = coerced
        elif key == "bins":
            bins = coerced
        elif key == "split_threshold_v":
            split_threshold = coerced
    try:
        extraction = ExtractionConfig(**extraction_kwargs)
        sim = SimConfig(**sim_kwargs)
    except ValueError as exc:
        raise QphiError(f"invalid config value: {exc}") from None
    return RunSettings(
        extraction=extraction,
        sim=sim,
        fit_range=(fit_lo, fit_hi),
        bins=bins,
        split_threshold_v=split_threshold,
    )
