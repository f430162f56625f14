"""Run configuration: loading, validation and defaults.

A configuration is a JSON or YAML mapping::

    ambient:    {space: euclidean | hyperbolic | spherical, radius: 1.0}
    surface:    {family: flat_disk, params: {c: 0.5}}      # or {mesh: path/to/file.off}
    mesh_level: 2
    spectrum:   {count: 12, n_constrained: 8, dense_max: 3000}
    tolerances: {eps_rel: 1.0e-6, guard_factor: 3.0}
    topology:   {embedding_dim: null}
    output:     {figures: true, export_matrices: false, eigenvectors: 4}
    sweep:      {parameter: c, values: [-0.4, 0.0, 0.4]}

Unknown keys are rejected.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .spaceform import SPACE_NAMES
from .surface import FAMILIES

DEFAULTS = {
    "ambient": {"space": "euclidean", "radius": 1.0},
    "surface": {"family": "flat_disk", "params": {}},
    "mesh_level": 2,
    "spectrum": {"count": 12, "n_constrained": 8, "dense_max": 3000},
    "tolerances": {"eps_rel": 1e-6, "guard_factor": 3.0},
    "topology": {"embedding_dim": None},
    "output": {"figures": True, "export_matrices": False, "eigenvectors": 4},
}
SECTIONS = {
    "command": None,
    "ambient": {"space", "radius"},
    "surface": {"family", "params", "mesh"},
    "mesh_level": None,
    "spectrum": {"count", "n_constrained", "dense_max"},
    "tolerances": {"eps_rel", "guard_factor"},
    "topology": {"embedding_dim"},
    "output": {"figures", "export_matrices", "eigenvectors"},
    "sweep": {"parameter", "values"},
}
MAX_LEVEL = 5


@dataclass
class RunConfig:
    """Validated configuration; ``data`` holds the fully defaulted mapping."""

    data: dict
    source: str = "<dict>"
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def mesh_path(self):
        m = self.data["surface"].get("mesh")
        if m is None:
            return None
        p = Path(m)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self):
        return copy.deepcopy(self.data)

    def with_updates(self, **changes):
        """Copy with top-level sections replaced or patched (nested dicts are merged)."""
        d = self.to_dict()
        for k, v in changes.items():
            if isinstance(v, dict) and isinstance(d.get(k), dict):
                d[k].update(v)
            else:
                d[k] = v
        return validate(d, self.source, self.base_dir)


def _positive(name, value, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or value <= 0:
        raise ConfigError(f"{name} must be a positive {'integer' if integer else 'number'}, got {value!r}")


def validate(raw, source="<dict>", base_dir=None):
    """Check keys and ranges and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: configuration must be a mapping")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    data = copy.deepcopy(DEFAULTS)
    for key, allowed in SECTIONS.items():
        if key not in raw:
            continue
        val = raw[key]
        if allowed is None:
            data[key] = val
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"{source}: section {key!r} must be a mapping")
        bad = sorted(set(val) - allowed)
        if bad:
            raise ConfigError(f"{source}: unknown keys in {key!r}: {bad}")
        if key == "surface" and ("mesh" in val or "family" in val):
            data[key] = {}
        data.setdefault(key, {}).update(copy.deepcopy(val))

    amb = data["ambient"]
    if amb["space"] not in SPACE_NAMES:
        raise ConfigError(f"ambient.space must be one of {sorted(SPACE_NAMES)}")
    _positive("ambient.radius", amb["radius"])
    amb["radius"] = float(amb["radius"])
    srf = data["surface"]
    if ("mesh" in srf) == ("family" in srf):
        raise ConfigError("surface needs exactly one of 'family' or 'mesh'")
    if "family" in srf:
        if srf["family"] not in FAMILIES:
            raise ConfigError(f"surface.family must be one of {list(FAMILIES)}")
        srf.setdefault("params", {})
        if not isinstance(srf["params"], dict):
            raise ConfigError("surface.params must be a mapping")
    lvl = data["mesh_level"]
    if isinstance(lvl, bool) or not isinstance(lvl, int) or not 0 <= lvl <= MAX_LEVEL:
        raise ConfigError(f"mesh_level must be an integer in [0, {MAX_LEVEL}]")
    for k in ("count", "n_constrained", "dense_max"):
        _positive(f"spectrum.{k}", data["spectrum"][k], integer=True)
    for k in ("eps_rel", "guard_factor"):
        _positive(f"tolerances.{k}", data["tolerances"][k])
    if data["tolerances"]["guard_factor"] < 1:
        raise ConfigError("tolerances.guard_factor must be at least 1")
    d = data["topology"]["embedding_dim"]
    if d is not None:
        _positive("topology.embedding_dim", d, integer=True)
    ev = data["output"]["eigenvectors"]
    if isinstance(ev, bool) or not isinstance(ev, int) or ev < 0:
        raise ConfigError("output.eigenvectors must be a nonnegative integer")
    if "sweep" in data:
        sw = data["sweep"]
        if "parameter" not in sw or "values" not in sw:
            raise ConfigError("sweep needs 'parameter' and 'values'")
        if not isinstance(sw["values"], list) or not sw["values"]:
            raise ConfigError("sweep.values must be a nonempty list")
        if sw["parameter"] != "radius" and "family" not in srf:
            raise ConfigError("sweeping a surface parameter needs a family surface")
    return RunConfig(data, source, Path(base_dir) if base_dir is not None else Path.cwd())


def load_config(path):
    """Read a JSON (.json) or YAML (.yaml, .yml) configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        elif path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raise ConfigError(f"{path}: expected a .json, .yaml or .yml file")
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return validate(raw, str(path), path.parent)
