"""Experiment configuration files (TOML).

Every section is optional except ``[data]``.  Unknown keys are rejected and
all problems are collected before anything is reported, so one run of
``parse_config`` lists every mistake in the file.

Example::

    [experiment]
    kind = "dynamic"          # or "nondynamic"
    seeds = [0, 1, 2]
    output_dir = "runs/fig6"

    [data]
    train_images = "../data/mnist/train-images-idx3-ubyte.gz"
    train_labels = "../data/mnist/train-labels-idx1-ubyte.gz"
    test_images = "../data/mnist/test-images-idx3-ubyte.gz"
    test_labels = "../data/mnist/test-labels-idx1-ubyte.gz"

    [network]
    num_excitatory = 400
    weight_format = "Q0.3"

Relative paths resolve against the directory holding the config file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .network import NetworkConfig
from .neuron import LifParams
from .plasticity import StdpParams
from .quant import make_format
from .scenario import EncodingConfig, ScenarioConfig
from .search import SearchConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIO_KINDS = ("dynamic", "nondynamic")
_BIT_KEYS = ("integer_bits", "fractional_bits")
_DATA_KEYS = ("train_images", "train_labels", "test_images", "test_labels")


@dataclass(frozen=True)
class DataPaths:
    train_images: Path
    train_labels: Path
    test_images: Path
    test_labels: Path


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataPaths
    network: NetworkConfig = field(default_factory=NetworkConfig)
    lif: LifParams = field(default_factory=LifParams)
    stdp: StdpParams = field(default_factory=StdpParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    kind: str = "dynamic"
    seeds: tuple[int, ...] = (0,)
    output_dir: Path = Path("runs")
    search: SearchConfig | None = None
    source: Path | None = None

    def with_overrides(self, *, seeds=None, output_dir=None, samples_per_class=None):
        cfg = self
        if seeds is not None:
            cfg = replace(cfg, seeds=tuple(int(s) for s in seeds))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        if samples_per_class is not None:
            scenario = replace(cfg.scenario, samples_per_class=int(samples_per_class))
            errors = scenario.validation_errors()
            if errors:
                raise ConfigurationError("; ".join(errors))
            cfg = replace(cfg, scenario=scenario)
        return cfg


def _field_names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _take(section: dict, allowed: set[str], where: str, errors: list[str]) -> dict:
    if not isinstance(section, dict):
        errors.append(f"[{where}] must be a table")
        return {}
    for key in sorted(set(section) - allowed):
        errors.append(f"[{where}] unknown key '{key}'")
    return {k: v for k, v in section.items() if k in allowed}


def _build(cls, kwargs: dict, where: str, errors: list[str]):
    try:
        obj = cls(**kwargs)
    except ConfigurationError as exc:
        errors.extend(f"[{where}] {msg}" for msg in str(exc).split("; "))
        return None
    except (TypeError, ValueError) as exc:
        errors.append(f"[{where}] {exc}")
        return None
    check = getattr(obj, "validation_errors", None)
    if check is not None:
        try:
            problems = check()
        except (TypeError, ValueError) as exc:
            problems = [str(exc)]
        if problems:
            errors.extend(f"[{where}] {msg}" for msg in problems)
            return None
    return obj


_SECTIONS = {"experiment", "data", "network", "lif", "stdp", "scenario", "encoding", "search"}


def config_from_dict(raw: dict, base_dir: Path = Path("."), source: Path | None = None) -> ExperimentConfig:
    """Validate a parsed TOML document; raise ConfigurationError listing every problem."""
    errors: list[str] = []
    for key in sorted(set(raw) - _SECTIONS):
        errors.append(f"unknown section or key '{key}'")

    exp = _take(raw.get("experiment", {}), {"kind", "seeds", "output_dir"}, "experiment", errors)
    kind = exp.get("kind", "dynamic")
    if kind not in SCENARIO_KINDS:
        errors.append(f"[experiment] kind must be one of {SCENARIO_KINDS}, got {kind!r}")
    seeds = exp.get("seeds", [0])
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and s >= 0 for s in seeds)):
        errors.append(f"[experiment] seeds must be a non-empty list of non-negative integers, got {seeds!r}")
        seeds = [0]
    output_dir = base_dir / exp.get("output_dir", "runs")

    data = None
    if "data" not in raw:
        errors.append("missing [data] section")
    else:
        d = _take(raw["data"], set(_DATA_KEYS), "data", errors)
        missing = [k for k in _DATA_KEYS if k not in d]
        for k in missing:
            errors.append(f"[data] missing key '{k}'")
        if not missing:
            data = DataPaths(*(base_dir / d[k] for k in _DATA_KEYS))

    net_kwargs = _take(raw.get("network", {}), _field_names(NetworkConfig) | set(_BIT_KEYS),
                       "network", errors)
    if any(k in net_kwargs for k in _BIT_KEYS):
        if "weight_format" in net_kwargs:
            errors.append("[network] give either weight_format or integer_bits/fractional_bits, not both")
        i = net_kwargs.pop("integer_bits", 0)
        f = net_kwargs.pop("fractional_bits", None)
        if f is None:
            errors.append("[network] integer_bits given without fractional_bits")
        elif not (isinstance(i, int) and isinstance(f, int)):
            errors.append("[network] integer_bits and fractional_bits must be integers")
        else:
            try:
                net_kwargs["weight_format"] = str(make_format(i, f))
            except ConfigurationError as exc:
                errors.append(f"[network] {exc}")
    net = _build(NetworkConfig, net_kwargs, "network", errors)
    lif = _build(LifParams, _take(raw.get("lif", {}), _field_names(LifParams), "lif", errors), "lif", errors)
    stdp = _build(StdpParams, _take(raw.get("stdp", {}), _field_names(StdpParams), "stdp", errors),
                  "stdp", errors)
    enc = _build(EncodingConfig, _take(raw.get("encoding", {}), _field_names(EncodingConfig), "encoding", errors),
                 "encoding", errors)
    sc_keys = _field_names(ScenarioConfig) - {"encoding"}
    scenario = None
    if enc is not None:
        sc_kwargs = _take(raw.get("scenario", {}), sc_keys, "scenario", errors)
        scenario = _build(ScenarioConfig, dict(sc_kwargs, encoding=enc), "scenario", errors)

    search = None
    if "search" in raw:
        search = _build(SearchConfig, _take(raw["search"], _field_names(SearchConfig), "search", errors),
                        "search", errors)
        if search is not None and net is not None and lif is not None:
            try:
                search.check_against(net.w_decay, lif.theta_inc)
            except ConfigurationError as exc:
                errors.extend(f"[search] {msg}" for msg in str(exc).split("; "))
        if net is not None and net.format is None:
            errors.append("[search] the refined model must use a quantized weight_format")

    if errors:
        raise ConfigurationError("; ".join(errors))
    return ExperimentConfig(data, net, lif, stdp, scenario, kind, tuple(seeds), output_dir, search, source)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return config_from_dict(raw, path.resolve().parent, path)
