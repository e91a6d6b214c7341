"""
Experiment configuration files.

A config is a flat INI file read with configparser::

    [experiment]
    kind = floating          # floating random efron dual spherical hyperbolic hilbert omegacp bestapprox
    seed = 7
    replicates = 100
    workers = 1
    quantity = floating      # spherical/hyperbolic/hilbert: floating, random or duality
    mode = inscribed         # bestapprox: inscribed or circumscribed

    [body]
    body = ellipse a=2 b=1   # see `floatlab list-bodies`
    ambient = disk           # hilbert/omegacp: the domain C
    compare = disk           # bestapprox: second body of the ratio test

    [weight]
    phi = one                # one, const c=2, bump, klein, chart, sigma (hilbert defaults to sigma)
    psi = one
    flavor = busemann        # busemann or holmes-thompson

    [grid]
    values = 1e-3, 1e-4, 1e-5
    terms = 1
    rtol = 1e-3
    max_directions = 4096

    [output]
    out = results/ellipse
    format = csv             # csv, svg or both

Every field has a default except ``kind``; CLI flags override file values.
"""

import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from floatlab.bodies import WeightFn, parse_body
from floatlab.errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("floating", "random", "efron", "dual", "spherical", "hyperbolic", "hilbert", "omegacp",
                    "bestapprox")
FORMATS = ("csv", "svg", "both")
FLAVORS = ("busemann", "holmes-thompson")
QUANTITIES = ("floating", "random", "duality")
MODES = ("inscribed", "circumscribed")
SAMPLE_SIZE_KINDS = ("random", "efron", "dual", "bestapprox")
# smallest sample size per kind; dual cells are clipped to K + B^n, so any m works
MIN_SAMPLE_SIZE = {"dual": 1}

# section -> key -> ExperimentConfig attribute
SCHEMA: Dict[str, Dict[str, str]] = {
    "experiment": {"kind": "kind", "seed": "seed", "replicates": "replicates", "workers": "workers",
                   "quantity": "quantity", "mode": "mode"},
    "body": {"body": "body", "ambient": "ambient", "compare": "compare"},
    "weight": {"phi": "phi", "psi": "psi", "flavor": "flavor"},
    "grid": {"values": "grid", "terms": "terms", "rtol": "rtol", "max_directions": "max_directions"},
    "output": {"out": "out", "format": "format"},
}
INT_FIELDS = ("seed", "replicates", "workers", "terms", "max_directions")
FLOAT_FIELDS = ("rtol",)


def parse_weight(text: str, chart_density: Optional[WeightFn] = None,
                 hilbert_density: Optional[WeightFn] = None) -> WeightFn:
    """
    Weight from its description.

    ``chart`` and ``sigma`` resolve to the densities passed in by the caller
    (the model chart and the Hilbert geometry of the experiment).

    Raises:
        ValueError: Unknown weight or one that the experiment cannot supply
    """
    tokens = text.split()
    if not tokens:
        raise ValueError("empty weight description")
    name = tokens[0].lower()
    params = {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"{name}: unexpected token {tok!r}")
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise ValueError(f"{name}: parameter {key} is not a number: {value!r}") from exc
    if name == "one":
        return WeightFn.one()
    if name == "const":
        if "c" not in params:
            raise ValueError("const needs c=<value>")
        return WeightFn.const(params["c"])
    if name == "bump":
        return WeightFn.bump()
    if name == "klein":
        return WeightFn.klein()
    if name == "chart":
        if chart_density is None:
            raise ValueError("weight 'chart' needs a spherical or hyperbolic experiment")
        return chart_density
    if name == "sigma":
        if hilbert_density is None:
            raise ValueError("weight 'sigma' needs an ambient Hilbert domain")
        return hilbert_density
    raise ValueError(f"unknown weight {name!r}; known: one, const c=.., bump, klein, chart, sigma")


def _parse_grid(text: str) -> List[float]:
    values = [v.strip() for v in text.replace(";", ",").split(",")]
    try:
        return [float(v) for v in values if v]
    except ValueError as exc:
        raise ConfigError(f"grid values must be numbers: {text!r}", field="grid.values") from exc


@dataclass
class ExperimentConfig:
    """Validated experiment description."""
    kind: str
    body: str = "disk"
    phi: Optional[str] = None
    psi: Optional[str] = None
    grid: List[float] = field(default_factory=list)
    replicates: int = 100
    seed: int = 0
    out: str = ""
    format: str = "csv"
    flavor: str = "busemann"
    ambient: str = "disk"
    compare: Optional[str] = None
    quantity: str = "floating"
    mode: str = "inscribed"
    rtol: float = 1e-3
    terms: Optional[int] = None
    workers: int = 1
    max_directions: int = 4096

    def __post_init__(self):
        self.validate()

    @property
    def geometry(self) -> Optional[str]:
        return self.kind if self.kind in ("spherical", "hyperbolic") else None

    def validate(self) -> None:
        """
        Raises:
            ConfigError: Naming the offending field
        """
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of "
                              f"{', '.join(EXPERIMENT_KINDS)}", field="experiment.kind")
        if self.replicates < 1:
            raise ConfigError(f"must be >= 1, got {self.replicates}", field="experiment.replicates")
        if self.workers < 1:
            raise ConfigError(f"must be >= 1, got {self.workers}", field="experiment.workers")
        if self.format not in FORMATS:
            raise ConfigError(f"expected one of {', '.join(FORMATS)}, got {self.format!r}", field="output.format")
        self.flavor = self.flavor.strip().lower().replace("_", "-")
        if self.flavor not in FLAVORS:
            raise ConfigError(f"expected busemann or holmes-thompson, got {self.flavor!r}", field="weight.flavor")
        if self.quantity not in QUANTITIES:
            raise ConfigError(f"expected one of {', '.join(QUANTITIES)}, got {self.quantity!r}",
                              field="experiment.quantity")
        if self.quantity == "duality" and self.kind != "spherical":
            raise ConfigError("duality experiments are spherical", field="experiment.quantity")
        if self.mode not in MODES:
            raise ConfigError(f"expected inscribed or circumscribed, got {self.mode!r}", field="experiment.mode")
        if self.terms is not None and self.terms < 0:
            raise ConfigError(f"must be >= 0, got {self.terms}", field="grid.terms")
        if not 0 < self.rtol < 1:
            raise ConfigError(f"must lie in (0, 1), got {self.rtol}", field="grid.rtol")
        self._validate_bodies()
        self._validate_weights()
        self._validate_grid()

    def _validate_bodies(self) -> None:
        for name, text in (("body.body", self.body), ("body.ambient", self.ambient), ("body.compare", self.compare)):
            if text is None:
                continue
            try:
                parse_body(text)
            except ValueError as exc:
                raise ConfigError(str(exc), field=name) from exc

    def _validate_weights(self) -> None:
        default = "sigma" if self.kind == "hilbert" else "one"
        self.phi = self.phi or default
        self.psi = self.psi or default
        placeholder = WeightFn.one()
        chart = placeholder if self.geometry else None
        sigma = placeholder if self.kind in ("hilbert", "bestapprox") else None
        for name, text in (("weight.phi", self.phi), ("weight.psi", self.psi)):
            try:
                parse_weight(text, chart, sigma)
            except ValueError as exc:
                raise ConfigError(str(exc), field=name) from exc

    def _validate_grid(self) -> None:
        values = np.asarray(self.grid, dtype=float)
        if len(values) > 1:
            steps = np.diff(values)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ConfigError("grid must be strictly monotone", field="grid.values")
        if self.kind == "omegacp":
            if np.any((values <= 0) | (values >= 1)):
                raise ConfigError("dilation factors must lie in (0, 1)", field="grid.values")
        elif self.uses_sample_sizes:
            least = MIN_SAMPLE_SIZE.get(self.kind, 3)
            if np.any(values != np.round(values)) or np.any(values < least):
                raise ConfigError(f"sample sizes must be integers >= {least}", field="grid.values")
        elif np.any(values <= 0):
            raise ConfigError("delta values must be positive", field="grid.values")

    @property
    def uses_sample_sizes(self) -> bool:
        if self.kind in SAMPLE_SIZE_KINDS:
            return True
        return self.kind in ("spherical", "hyperbolic", "hilbert") and self.quantity in ("random", "duality")

    @property
    def sample_sizes(self) -> List[int]:
        return [int(round(v)) for v in self.grid]

    def terms_or(self, default: int) -> int:
        return default if self.terms is None else self.terms

    def output_stem(self) -> str:
        return self.out or f"floatlab-{self.kind}"

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with non-None overrides applied (and validated)."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        values: Dict[str, object] = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", field=section)
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key in [{section}]", field=f"{section}.{key}")
                attr = SCHEMA[section][key]
                values[attr] = cls._convert(attr, raw.strip(), f"{section}.{key}")
        if "kind" not in values:
            raise ConfigError("missing experiment kind", field="experiment.kind")
        logger.debug("Loaded config from %s: %s", source, values)
        return cls(**values)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """
        Raises:
            FileNotFoundError: If the file does not exist
            ConfigError: If it does not describe a valid experiment
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as f:
            return cls.from_text(f.read(), source=path)

    @staticmethod
    def _convert(attr: str, raw: str, name: str):
        if attr == "grid":
            return _parse_grid(raw)
        try:
            if attr in INT_FIELDS:
                return int(raw)
            if attr in FLOAT_FIELDS:
                return float(raw)
        except ValueError as exc:
            raise ConfigError(f"not a number: {raw!r}", field=name) from exc
        if attr in ("kind", "format", "quantity", "mode"):
            return raw.lower()
        return raw
