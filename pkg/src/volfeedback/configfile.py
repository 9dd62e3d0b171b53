"""
Plain-text simulation configs.

One ``key = value`` per line, ``#`` starts a comment. Kernel arrays are given
as one of::

    k_plus = 0.1, 0.08, 0.05          # inline values for lags 1, 2, 3
    k_plus = exp 0.1 20               # 0.1 * exp(-tau / 20) on lags 1..tau_max
    k_plus = @kernels.csv             # column k_plus of a CSV (relative to the config)
    k_plus = @kernels.csv:my_column

Example::

    sigma0 = 0.01
    tau_max = 200
    k_plus = exp 0.1 20
    k_minus = exp -0.12 20
    length = 2000000
    seed = 12345
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .marketdata import DataError
from .simulator import SimConfig, exponential_kernel

__all__ = ["ConfigError", "load_sim_config", "parse_config"]

_INT_KEYS = {"length", "seed", "burn_in", "tau_max", "replicas"}
_FLOAT_KEYS = {"sigma0", "sigma_floor", "er_plus", "er_minus"}
_STR_KEYS = {"centering"}
_KERNEL_KEYS = {"k_plus", "k_minus"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _KERNEL_KEYS


class ConfigError(ValueError):
    """Invalid configuration file or parameter set."""


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _kernel(text: str, key: str, tau_max: int | None, base: Path) -> np.ndarray:
    text = text.strip()
    if text.startswith("@"):
        ref = text[1:]
        column = key
        if ":" in ref:
            ref, column = ref.rsplit(":", 1)
        path = (base / ref) if not Path(ref).is_absolute() else Path(ref)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or column not in reader.fieldnames:
                raise ConfigError(f"{path}: no column {column!r}")
            try:
                values = np.array([float(row[column]) for row in reader])
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from None
    elif text.split()[0] == "exp":
        parts = text.split()
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected 'exp AMPLITUDE SCALE'")
        if tau_max is None:
            raise ConfigError(f"{key}: 'exp' kernels need tau_max")
        values = exponential_kernel(float(parts[1]), float(parts[2]), tau_max)
    else:
        try:
            values = np.array([float(v) for v in text.split(",") if v.strip()])
        except ValueError:
            raise ConfigError(f"{key}: cannot parse kernel values {text!r}") from None
    if tau_max is not None and values.size != tau_max:
        if values.size > tau_max:
            values = values[:tau_max]
        else:
            values = np.concatenate([values, np.zeros(tau_max - values.size)])
    return values


def load_sim_config(path, seed: int | None = None) -> tuple[SimConfig, dict]:
    """
    Read a config file into a :class:`SimConfig`.

    Returns the config and the resolved key/value map (including ``replicas``
    if present). ``seed`` overrides the file's seed.
    """
    path = Path(path)
    try:
        raw = parse_config(path.read_text(encoding="utf-8"), str(path))
    except FileNotFoundError:
        raise
    values: dict = {}
    try:
        for key in _INT_KEYS & raw.keys():
            values[key] = int(raw[key])
        for key in _FLOAT_KEYS & raw.keys():
            values[key] = float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key in _STR_KEYS & raw.keys():
        values[key] = raw[key]
    for key in ("sigma0", "length", "k_plus", "k_minus"):
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
    tau_max = values.get("tau_max")
    k_plus = _kernel(raw["k_plus"], "k_plus", tau_max, path.parent)
    k_minus = _kernel(raw["k_minus"], "k_minus", tau_max if tau_max else k_plus.size, path.parent)
    if seed is not None:
        values["seed"] = seed
    kwargs = {k: values[k] for k in ("sigma0", "length", "seed", "burn_in", "sigma_floor", "er_plus", "er_minus", "centering") if k in values}
    try:
        config = SimConfig(k_plus=k_plus, k_minus=k_minus, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    resolved = dict(raw)
    resolved.update({k: v for k, v in values.items()})
    resolved["seed"] = config.seed
    resolved["burn_in"] = config.burn_in
    resolved["tau_max"] = config.tau_max
    return config, resolved
