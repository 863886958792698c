"""Plain-text ``key=value`` configuration files and command-line overrides."""

from dataclasses import fields
from pathlib import Path

from .errors import FormatError, InputError

ALIASES = {
    "lambda": "adv_weight",
    "lr": "learning_rate",
    "batch": "batch_size",
    "dropout": "dropout",  # expands to both dropout fields
}

# keys the harness understands besides GalConfig fields
HARNESS_KEYS = {"n_groups", "grouping", "group_seed"}


def parse_pairs(lines, source="<config>"):
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FormatError("expected key=value", path=source, line=lineno)
        out[key.strip()] = value.strip()
    return out


def read_config(path):
    path = Path(path)
    return parse_pairs(path.read_text().splitlines(), source=path)


def _field_types():
    from .model import GalConfig

    return {f.name: f.type for f in fields(GalConfig)}


def _convert(key, value, typ):
    if not isinstance(value, str):
        return value
    try:
        if typ in (bool, "bool"):
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ in (int, "int"):
            return int(value)
        if typ in (float, "float"):
            return float(value)
    except ValueError:
        raise InputError(f"config key {key!r}: cannot parse {value!r} as {getattr(typ, '__name__', typ)}") from None
    return value


def coerce_config(pairs, allow_extra=False):
    """Map raw string pairs onto typed GalConfig keyword arguments.

    With ``allow_extra`` the harness-only keys (``n_groups``, ``grouping``,
    ``group_seed``) are passed through instead of rejected.
    """
    types = _field_types()
    out = {}
    for key, value in pairs.items():
        name = ALIASES.get(key, key)
        if name == "dropout":
            p = _convert(key, value, float)
            out["dropout_trunk"] = out["dropout_group"] = p
            continue
        if name in types:
            out[name] = _convert(key, value, types[name])
        elif allow_extra and name in HARNESS_KEYS:
            out[name] = int(value) if name in ("n_groups", "group_seed") and isinstance(value, str) else value
        else:
            raise InputError(f"unknown config key {key!r}")
    return out


def split_harness_keys(values):
    cfg = {k: v for k, v in values.items() if k not in HARNESS_KEYS}
    extra = {k: v for k, v in values.items() if k in HARNESS_KEYS}
    return cfg, extra
