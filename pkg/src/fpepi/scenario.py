"""Scenario presets, flat-text configuration files, and their round trip.

Config files are one ``key = value`` per line with ``#`` comments.  Keys
mirror the configuration field paths (``model.beta``, ``grid.nx``,
``cost.running``, ``sqh.lambda``, ``init.center``...).  A ``base = <preset>``
line seeds every field from that preset so a file only needs to list what it
changes; without a base, every key must be present.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cost import CostSpec
from .dynamics import ModelParams
from .grid import GridSpec
from .sqh import SqhParams

__all__ = ["ScenarioConfig", "ConfigError", "PRESET_NAMES", "preset",
           "load_config", "loads_config", "dumps_config", "save_config"]

PRESET_NAMES = ("uncontrolled", "scenario1", "scenario2", "scenario3")

# Six default density snapshot times: start, three mid-epidemic views, the
# settling point, and the horizon.
DEFAULT_SNAPSHOT_TIMES = (0.0, 1.25, 2.50, 3.75, 5.00, 10.00)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one run needs: model, meshes, costs, iteration knobs."""

    model: ModelParams
    grid: GridSpec
    cost: CostSpec
    sqh: SqhParams
    init_center: tuple[float, float] = (0.99, 0.01)
    init_variance: float = 0.025
    label: str = "custom"

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("label must be nonempty")
        if self.init_variance <= 0:
            raise ValueError("init_variance must be positive")


class ConfigError(ValueError):
    """Malformed configuration file."""


def preset(name: str) -> ScenarioConfig:
    """Fully populated configuration for one of the built-in experiments."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset '{name}' (choose from {', '.join(PRESET_NAMES)})")
    model = ModelParams()
    if name == "scenario3":
        model = replace(model, v_max=0.0)
    running = {"uncontrolled": "zero",
               "scenario1": "linear_in_i:1.5",
               "scenario2": "indicator:0.15",
               "scenario3": "zero"}[name]
    terminal = "neg_susceptible_surplus:0.3" if name == "scenario3" else "zero"
    return ScenarioConfig(
        model=model,
        grid=GridSpec(),
        cost=CostSpec(beta1=0.2, beta2=0.1, running=running, terminal=terminal),
        sqh=SqhParams(),
        init_center=(0.99, 0.01),
        init_variance=0.025,
        label=name,
    )


_FLOAT_KEYS = {
    "model.b": ("model", "b"),
    "model.delta": ("model", "delta"),
    "model.beta": ("model", "beta"),
    "model.gamma": ("model", "gamma"),
    "model.noise_coeff": ("model", "noise_coeff"),
    "model.alpha_max": ("model", "alpha_max"),
    "model.v_max": ("model", "v_max"),
    "model.eta_max": ("model", "eta_max"),
    "grid.T": ("grid", "T"),
    "grid.x_lo": ("grid", "x_lo"),
    "grid.x_hi": ("grid", "x_hi"),
    "cost.beta1": ("cost", "beta1"),
    "cost.beta2": ("cost", "beta2"),
    "sqh.eps0": ("sqh", "eps0"),
    "sqh.mu": ("sqh", "mu"),
    "sqh.zeta": ("sqh", "zeta"),
    "sqh.lambda": ("sqh", "lam"),
    "sqh.kappa": ("sqh", "kappa"),
    "init.variance": (None, "init_variance"),
}
_INT_KEYS = {
    "grid.nx": ("grid", "nx"),
    "grid.nt": ("grid", "nt"),
    "grid.substeps_per_interval": ("grid", "substeps_per_interval"),
    "sqh.k_max": ("sqh", "k_max"),
    "sqh.inner_max": ("sqh", "inner_max"),
}
_STR_KEYS = {
    "cost.running": ("cost", "running"),
    "cost.terminal": ("cost", "terminal"),
    "label": (None, "label"),
}
_ALL_KEYS = set(_FLOAT_KEYS) | set(_INT_KEYS) | set(_STR_KEYS) | {"base", "init.center"}


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse configuration text; errors carry the offending line number."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        entries[key] = value

    if "base" in entries:
        base_name = entries.pop("base")
        try:
            cfg = preset(base_name)
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        sections = {"model": dict(vars(cfg.model)), "grid": dict(vars(cfg.grid)),
                    "cost": dict(vars(cfg.cost)), "sqh": dict(vars(cfg.sqh))}
        top = {"init_center": cfg.init_center, "init_variance": cfg.init_variance,
               "label": cfg.label}
    else:
        missing = sorted((_ALL_KEYS - {"base"}) - set(entries))
        if missing:
            raise ConfigError(f"{source}: no 'base' preset and missing keys: {', '.join(missing)}")
        sections = {"model": {}, "grid": {}, "cost": {}, "sqh": {}}
        top = {}

    def assign(section: str | None, field_name: str, value):
        if section is None:
            top[field_name] = value
        else:
            sections[section][field_name] = value

    for key, value in entries.items():
        try:
            if key == "init.center":
                parts = [float(v) for v in value.split(",")]
                if len(parts) != 2:
                    raise ValueError("expected two comma-separated floats")
                top["init_center"] = (parts[0], parts[1])
            elif key in _FLOAT_KEYS:
                assign(*_FLOAT_KEYS[key], float(value))
            elif key in _INT_KEYS:
                assign(*_INT_KEYS[key], int(value))
            else:
                assign(*_STR_KEYS[key], value)
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for '{key}': {exc}") from exc

    try:
        return ScenarioConfig(
            model=ModelParams(**sections["model"]),
            grid=GridSpec(**sections["grid"]),
            cost=CostSpec(**sections["cost"]),
            sqh=SqhParams(**sections["sqh"]),
            **top,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read(), source=str(path))


def dumps_config(cfg: ScenarioConfig) -> str:
    """Serialize every field; reloading reproduces an identical config."""
    lines = [f"label = {cfg.label}"]
    for key, (section, field_name) in sorted({**_FLOAT_KEYS, **_INT_KEYS}.items()):
        obj = cfg if section is None else getattr(cfg, section)
        lines.append(f"{key} = {getattr(obj, field_name)!r}")
    for key, (section, field_name) in sorted(_STR_KEYS.items()):
        if key == "label":
            continue
        obj = cfg if section is None else getattr(cfg, section)
        lines.append(f"{key} = {getattr(obj, field_name)}")
    lines.append(f"init.center = {cfg.init_center[0]!r}, {cfg.init_center[1]!r}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_config(cfg))
