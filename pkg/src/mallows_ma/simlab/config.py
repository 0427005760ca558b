"""
INI experiment files.

Example::

    [experiment]
    scenario = nested
    n = 100, 400, 1600
    p = n
    methods = mma_group
    replications = 300
    seed = 2024

    [coefficients]
    decay = polynomial
    alpha = 1.0
    order = ordered

    [noise]
    family = student_t
    snr = 5

``p`` is ``n``, ``sqrt`` or a list of integers. The optional ``[design]``
section (pcr only) takes ``d``, ``rho`` and ``folds``.
"""

from __future__ import annotations

import configparser
import re
from typing import Optional

from .experiment import SCENARIO_METHODS, ExperimentConfig, FieldError

__all__ = ["ConfigError", "load_config", "parse_config", "config_echo"]

SCHEMA = {
    "experiment": ("scenario", "n", "p", "methods", "replications", "seed"),
    "coefficients": ("decay", "alpha", "order", "scale"),
    "noise": ("family", "snr", "sigma2"),
    "design": ("d", "rho", "folds"),
}
FIELD_KEYS = {
    "scenario": ("experiment", "scenario"),
    "n_values": ("experiment", "n"),
    "p_rule": ("experiment", "p"),
    "p_values": ("experiment", "p"),
    "methods": ("experiment", "methods"),
    "replications": ("experiment", "replications"),
    "master_seed": ("experiment", "seed"),
    "decay": ("coefficients", "decay"),
    "alpha": ("coefficients", "alpha"),
    "order": ("coefficients", "order"),
    "noise": ("noise", "family"),
    "snr": ("noise", "snr"),
    "sigma2": ("noise", "sigma2"),
    "design_d": ("design", "d"),
    "design_rho": ("design", "rho"),
    "cv_folds": ("design", "folds"),
}
REQUIRED = (("experiment", "scenario"), ("experiment", "n"))


class ConfigError(ValueError):
    """Invalid experiment file; carries the offending line and field when known."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None, source: str = "<config>"):
        self.line, self.field, self.source = line, field, source
        where = source + (f":{line}" if line else "") + (f" [{field}]" if field else "")
        super().__init__(f"{where}: {message}")


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def _ints(raw):
    return tuple(int(t) for t in re.split(r"[,\s]+", raw.strip()) if t)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source=source) from None
    lines = _key_lines(text)

    def fail(msg, section, key=None):
        field = f"{section}.{key}" if key else section
        raise ConfigError(msg, lines.get((section, key)), field, source)

    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", None, section, source)
        for key in cp[section]:
            if key not in SCHEMA[section]:
                fail(f"unknown key {key!r}", section, key)
    for section, key in REQUIRED:
        if not cp.has_option(section, key):
            raise ConfigError("missing required field", None, f"{section}.{key}", source)

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            fail(f"cannot parse {raw!r} ({exc})", section, key)

    scenario = cp.get("experiment", "scenario").strip()
    if scenario not in SCENARIO_METHODS:
        fail(f"unknown scenario {scenario!r}; expected one of {tuple(SCENARIO_METHODS)}", "experiment", "scenario")
    p_raw = cp.get("experiment", "p", fallback="sqrt" if scenario == "all_subset" else "n").strip()
    if p_raw in ("n", "sqrt"):
        p_rule, p_values = p_raw, ()
    else:
        p_rule, p_values = "fixed", get("experiment", "p", _ints)
    methods = get("experiment", "methods", lambda s: tuple(t for t in re.split(r"[,\s]+", s.strip()) if t),
                  SCENARIO_METHODS[scenario])
    snr = get("noise", "snr", float)
    sigma2 = get("noise", "sigma2", float)
    if snr is None and sigma2 is None:
        snr = 5.0
    kwargs = dict(
        scenario=scenario,
        n_values=get("experiment", "n", _ints),
        methods=methods,
        replications=get("experiment", "replications", int, 100),
        master_seed=get("experiment", "seed", int, 0),
        p_rule=p_rule,
        p_values=p_values,
        decay=get("coefficients", "decay", str.strip, "polynomial"),
        alpha=get("coefficients", "alpha", float, 1.0),
        order=get("coefficients", "order", str.strip, "permuted" if scenario == "all_subset" else "ordered"),
        scale=get("coefficients", "scale", float, 1.0),
        noise=get("noise", "family", str.strip, "gaussian"),
        snr=snr,
        sigma2=sigma2,
        design_d=get("design", "d", int, 400),
        design_rho=get("design", "rho", float, 0.5),
        cv_folds=get("design", "folds", int, 5),
    )
    try:
        return ExperimentConfig(**kwargs)
    except FieldError as exc:
        section, key = FIELD_KEYS[exc.field]
        fail(str(exc), section, key)


def load_config(path) -> ExperimentConfig:
    """Read and validate an INI experiment file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", source=str(path)) from None
    return parse_config(text, source=str(path))


def config_echo(config: ExperimentConfig) -> dict:
    """Every resolved field, for run manifests."""
    out = {}
    for name in ExperimentConfig.__dataclass_fields__:
        v = getattr(config, name)
        out[name] = list(v) if isinstance(v, tuple) else v
    return out
