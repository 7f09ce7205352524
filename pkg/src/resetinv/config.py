"""Instance configuration files (TOML).

Example::

    problem = "water"
    gamma = 0.9
    k = 7
    c_max = 6.0
    n = 201            # grid knots
    seed = 0
    output_dir = "out"
    costs = { c_u = 1.0, c_r = 0.5, p = 5.0, q = [1.0, 1.3, 1.6, 1.9, 2.2, 2.5, 2.8] }
    demand = { family = "truncated_normal", mu = 2.0, sigma = 1.0 }

``epsilon`` (absolute BiDS tolerance) is optional; it defaults to ``1e-6``
times the initial upper bound. Retail instances also take ``k_u`` and
``k_r``; ``q`` may be a scalar or a list of length ``k``.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .demand import DemandModel
from .model import CostParameters, ProblemSpec

__all__ = ["InstanceConfig", "ConfigError", "load_config"]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CostBlock(_Strict):
    c_u: float = Field(ge=0)
    k_u: float = Field(0.0, ge=0)
    c_r: float = Field(ge=0)
    k_r: float = Field(0.0, ge=0)
    p: float = Field(ge=0)
    q: Union[float, list[float]]

    @field_validator("q")
    @classmethod
    def _q_nonneg(cls, v):
        vals = v if isinstance(v, list) else [v]
        if not vals or min(vals) < 0:
            raise ValueError("q must be nonnegative (and non-empty)")
        return v


class ExponentialDemand(_Strict):
    family: Literal["exponential"]
    lambda_: float = Field(alias="lambda", gt=0)


class TruncatedNormalDemand(_Strict):
    family: Literal["truncated_normal"]
    mu: float
    sigma: float = Field(gt=0)


DemandBlock = Annotated[Union[ExponentialDemand, TruncatedNormalDemand], Field(discriminator="family")]


class InstanceConfig(_Strict):
    problem: Literal["water", "retail"]
    gamma: float = Field(ge=0, lt=1)
    k: int = Field(ge=1)
    c_max: float = Field(gt=0)
    costs: CostBlock
    demand: DemandBlock
    n: int = Field(201, ge=2)
    epsilon: Optional[float] = Field(None, gt=0)
    seed: int = Field(0, ge=0)
    output_dir: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        q = self.costs.q
        if isinstance(q, list) and len(q) not in (1, self.k):
            raise ValueError(f"costs.q must be a scalar or have length k={self.k}")
        if self.problem == "water":
            if self.costs.k_u or self.costs.k_r:
                raise ValueError("water instances take no k_u / k_r")
            if isinstance(q, list) and any(b < a for a, b in zip(q, q[1:])):
                raise ValueError("water q(t) must be nondecreasing")
        return self

    def demand_model(self) -> DemandModel:
        d = self.demand
        if isinstance(d, ExponentialDemand):
            return DemandModel.exponential(d.lambda_)
        return DemandModel.truncated_normal(d.mu, d.sigma)

    def to_spec(self) -> ProblemSpec:
        q = self.costs.q
        costs = CostParameters(
            c=self.costs.c_u,
            K=self.costs.k_u,
            reset_unit=self.costs.c_r,
            reset_fixed=self.costs.k_r,
            p=self.costs.p,
            q=tuple(q) if isinstance(q, list) else (q,),
        )
        return ProblemSpec(self.problem, costs, self.demand_model(), self.c_max, self.k, self.gamma)


def load_config(path) -> InstanceConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return InstanceConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def reference_configs() -> dict[str, Path]:
    """Shipped reference instances, keyed by stem."""
    here = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(here.glob("*.toml"))}
