import os
import yaml
from typing import Any, Dict, Optional
from dotmap import DotMap
from ..core.errors import ConfigError, DomainError, InvalidFamilyError
from ..families import Families
from ..family import OffspringFamily


FAMILY_KEYS = {
    "stable": ("nu", "c"),
    "perturbed": ("nu", "c", "d"),
}


def _coerce(value: str) -> Any:
    text = value.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_key_values(text: str) -> Dict[str, Any]:
    """Flat `key=value` lines; `#` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected key=value, got '{line}'.")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def load_config(config_fname: str) -> DotMap:
    """Load a key=value or YAML configuration file into a DotMap."""
    if not os.path.isfile(config_fname):
        raise ConfigError(f"Config file {config_fname} not found.")
    with open(config_fname, "r", encoding="utf-8") as handle:
        text = handle.read()
    if config_fname.endswith((".yaml", ".yml")):
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{config_fname}: top level must be a mapping.")
    else:
        data = parse_key_values(text)
    return DotMap(data, _dynamic=False)


def merge_flags(config: Optional[DotMap], flags: Dict[str, Any]) -> DotMap:
    """Flags that were given (not None) override file values key by key."""
    merged = DotMap(config.toDict() if config is not None else {}, _dynamic=False)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def family_from_config(config: DotMap, verbose: bool = False) -> OffspringFamily:
    """Build a family from `family=<name>` plus its parameters."""
    name = config.get("family", "stable")
    if name not in Families:
        raise ConfigError(f"Unknown family '{name}', choose from {sorted(Families)}.")
    keys = FAMILY_KEYS[name]
    missing = [k for k in keys if config.get(k) is None]
    if missing:
        raise ConfigError(f"Family '{name}' needs {', '.join(missing)}.")
    try:
        return Families[name](*(float(config[k]) for k in keys), verbose=verbose)
    except (DomainError, InvalidFamilyError):
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Bad parameters for family '{name}': {exc}") from exc


def parse_family_spec(spec: str, verbose: bool = False) -> OffspringFamily:
    """Parse `family=perturbed nu=0.5 c=0.4 d=0.2`; unknown keys are rejected."""
    fields = {}
    for token in spec.split():
        if "=" not in token:
            raise ConfigError(f"Family spec token '{token}' is not key=value.")
        key, value = token.split("=", 1)
        fields[key] = _coerce(value)
    name = fields.get("family", "stable")
    allowed = {"family", *FAMILY_KEYS.get(name, ())}
    unknown = sorted(set(fields) - allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in family spec: {', '.join(unknown)}.")
    return family_from_config(DotMap(fields, _dynamic=False), verbose=verbose)
