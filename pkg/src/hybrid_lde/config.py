"""Scenario files: INI-style key/value text read with :mod:`configparser`.

::

    [scenario]
    scenario_id = fig5a
    design = hybrid
    sweep_axis = n_rf_node
    sweep_values = [1, 2, 3, 4, 5]
    noise_profile = homogeneous
    realizations = 1

    [system]
    n_nodes = 20
    rho = 1.0
    sigma2_fc = 0.1
    seed = 7

    [bcd]
    i_max = 40
    epsilon = 1e-4

``[scenario]`` keys are :class:`~hybrid_lde.bench.Scenario` fields,
``[system]`` keys are :class:`~hybrid_lde.model.SystemConfig` fields and
``[bcd]`` keys are :class:`~hybrid_lde.model.BcdSettings` fields. Values are
JSON literals; anything that does not parse as JSON is taken as a bare
string. Unknown sections or keys are errors. Omitted keys keep their
defaults.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import fields

from .bench import Scenario
from .model import BcdSettings, SystemConfig

SECTIONS = {
    "scenario": {f.name for f in fields(Scenario)} - {"config"},
    "system": {f.name for f in fields(SystemConfig)} - {"bcd"},
    "bcd": {f.name for f in fields(BcdSettings)},
}


class ConfigError(ValueError):
    pass


def _decode(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_scenario(text, source="<string>"):
    """Build a :class:`Scenario` from config-file text."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]; expected {sorted(SECTIONS)}")
        unknown = set(parser[section]) - SECTIONS[section]
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        values[section] = {k: _decode(v) for k, v in parser[section].items()}

    try:
        system = dict(values.get("system", {}))
        system["bcd"] = BcdSettings(**values.get("bcd", {}))
        config = SystemConfig(**system)
        return Scenario(config=config, **values.get("scenario", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source=str(path))


def _encode(v):
    return json.dumps(list(v) if isinstance(v, tuple) else v)


def scenario_to_text(scenario):
    """Inverse of :func:`parse_scenario`, with every field written explicitly."""
    sources = {"scenario": scenario, "system": scenario.config, "bcd": scenario.config.bcd}
    lines = []
    for section, obj in sources.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_encode(getattr(obj, k))}" for k in sorted(SECTIONS[section]))
        lines.append("")
    return "\n".join(lines)
