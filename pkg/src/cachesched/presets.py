"""Per-model parameter presets.

Values are the recommended settings for each video model: the sigmoid
stretch ``k``, threshold bounds ``(delta_min, delta_max)`` and the CFG
threshold. HunyuanVideo's distilled guidance has no separate unconditional
pass, so its preset disables the CFG path.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class Preset:
    name: str
    k: float | None
    delta_min: float | None
    delta_max: float | None
    delta_cfg: float | None
    cfg_enabled: bool


PRESETS = {
    "cogvideox15": Preset("cogvideox15", k=50.0, delta_min=0.2, delta_max=0.3, delta_cfg=0.02, cfg_enabled=True),
    "hunyuanvideo": Preset("hunyuanvideo", k=200.0, delta_min=0.1, delta_max=0.15, delta_cfg=None, cfg_enabled=False),
    "wan21": Preset("wan21", k=50.0, delta_min=0.1, delta_max=0.23, delta_cfg=0.02, cfg_enabled=True),
    "custom": Preset("custom", k=None, delta_min=None, delta_max=None, delta_cfg=None, cfg_enabled=True),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
