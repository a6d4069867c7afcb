import itertools
import json
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.algebra.tracial import ToolkitError
from src.martingales.filtration import Filtration, parse_filtration
from src.orlicz.functions import OrliczFunction, from_spec

ENV_PREFIX = "NCDAVIS_"
ENV_FIELDS = {"SEED": "seed", "INSTANCES": "instances", "OUT": "out", "WORKERS": "workers"}

INSTANCE_CHECKS = [
    "davis-type1", "davis-type2", "martingale-davis", "previsible", "lepingle", "orthogonality",
    "row-lemma", "kfunc-oracle", "burkholder", "transform", "e-davis-max", "stein",
    "phi-davis", "phi-burkholder", "falsify-small-p",
]
GLOBAL_CHECKS = ["lepingle-extremal", "orlicz-indices", "phi-stability", "burkholder-stability"]
ALL_CHECKS = INSTANCE_CHECKS + GLOBAL_CHECKS

# Default K-functional oracle grid: every t against every couple.
KFUNC_TS = [0.25, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0]
KFUNC_COUPLES = [
    (1.0, 1.5), (1.0, 2.0), (1.0, 3.0), (1.0, 4.0), (1.0, 8.0),
    (1.5, 2.0), (1.5, 3.0), (1.5, 6.0), (2.0, 3.0), (2.0, 4.0),
    (2.0, 8.0), (2.0, float("inf")), (3.0, 4.0), (3.0, 6.0), (4.0, 8.0),
]
DEFAULT_KFUNC_POINTS = [(t, p, q) for t, (p, q) in itertools.product(KFUNC_TS, KFUNC_COUPLES)]


class ConfigError(ToolkitError):
    """Configuration could not be read or validated."""


class PhiSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["power", "plog", "table"]
    p: Optional[float] = None
    q: Optional[float] = None
    scale: float = 1.0
    points: Optional[List[Tuple[float, float]]] = None

    def build(self) -> OrliczFunction:
        return from_spec(self.model_dump(exclude_none=True))


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    multiplicative: float = Field(1e-7, gt=0)
    psd: float = Field(1e-8, gt=0)
    identity: float = Field(1e-9, gt=0)
    oracle: float = Field(1e-3, gt=0)
    split_oracle: float = Field(1e-2, gt=0)
    index: float = Field(0.05, gt=0)
    stability: float = Field(0.25, gt=0)


class SearchSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    check: str = "lepingle"
    filtration: str = "partition:lopsided:64"
    restarts: int = Field(3, ge=1)
    iterations: int = Field(300, ge=1)
    sigma: float = Field(0.25, gt=0)
    patience: int = Field(20, ge=1)
    floor: float = 1.2


class ExperimentConfig(BaseModel):
    """Everything a run needs; identical configs give identical CSV reports."""
    model_config = ConfigDict(extra="forbid")

    filtration: str = "tensor:2x2x2x2x2x2"
    classical_filtration: str = "partition:dyadic:64:6"
    dims: List[str] = [
        "partition:dyadic:16:4", "partition:dyadic:32:5", "partition:dyadic:64:6", "partition:dyadic:64:8",
    ]
    stability_instances: int = Field(40, ge=1)
    instances: int = Field(200, ge=0)
    seed: int = Field(20240601, ge=0, lt=2 ** 64)
    p_grid: List[float] = [0.7, 1.0, 1.5]
    p_small_grid: List[float] = [0.3, 0.5, 0.65]
    q_grid: List[float] = [2.0, 4.0, float("inf")]
    stein_q_grid: List[float] = [2.0, 4.0, 8.0]
    row_lemma_exponents: List[Tuple[float, float, float]] = [(2.0, 4.0, 4.0), (4.0, 8.0, 8.0)]
    burkholder_spaces: List[str] = ["L3", "cap:2:4", "L1.5"]
    kfunc_points: List[Tuple[float, float, float]] = Field(list(DEFAULT_KFUNC_POINTS), min_length=1)
    phi_families: List[PhiSpec] = [
        PhiSpec(family="plog", p=1.5, q=0.4),
        PhiSpec(family="plog", p=1.3, q=0.7),
        PhiSpec(family="power", p=3.0),
    ]
    checks: List[str] = list(ALL_CHECKS)
    out: str = "reports"
    format: Literal["csv", "json"] = "csv"
    workers: int = Field(4, ge=1)
    tolerances: Tolerances = Tolerances()
    search: SearchSettings = SearchSettings()

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, value: List[str]) -> List[str]:
        unknown = [c for c in value if c not in ALL_CHECKS]
        if unknown:
            raise ValueError(f"unknown checks {unknown}; known: {ALL_CHECKS}")
        return value

    @field_validator("filtration", "classical_filtration")
    @classmethod
    def _parsable_filtration(cls, value: str) -> str:
        parse_filtration(value)
        return value

    @field_validator("dims")
    @classmethod
    def _parsable_dims(cls, value: List[str]) -> List[str]:
        for spec in value:
            parse_filtration(spec)
        return value

    def build_filtration(self) -> Filtration:
        return parse_filtration(self.filtration)

    def build_classical(self) -> Filtration:
        return parse_filtration(self.classical_filtration)

    def build_phis(self) -> List[OrliczFunction]:
        return [spec.build() for spec in self.phi_families]


def _line_of_key(text: str, key: Any) -> Optional[int]:
    match = re.search(rf'"{re.escape(str(key))}"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _describe(error: ValidationError, text: str) -> str:
    messages = []
    for item in error.errors():
        loc = item.get("loc", ())
        where = ".".join(str(part) for part in loc)
        line = _line_of_key(text, loc[0]) if loc and text else None
        prefix = f"line {line}: " if line else ""
        messages.append(f"{prefix}{where}: {item.get('msg')}")
    return "; ".join(messages)


def _env_overrides() -> Dict[str, Any]:
    overrides = {}
    for suffix, field in ENV_FIELDS.items():
        value = os.getenv(ENV_PREFIX + suffix)
        if value is not None and value != "":
            overrides[field] = value
    return overrides


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Defaults < JSON file < NCDAVIS_* environment < explicit overrides (CLI flags)."""
    text = ""
    data: Dict[str, Any] = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    data.update(_env_overrides())
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e, text)) from e
    except ToolkitError as e:
        raise ConfigError(str(e)) from e
