"""Scenario files: parsing, validation and model construction.

A scenario is a YAML document. Every key is checked against the schema
below before anything runs, and errors name the offending field and line.
Agent indices are 1-based. Numbers may be written as fractions (``"1/18"``).
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from . import models as md
from . import schedules
from .errors import ParseError

SCHEMA_VERSION = 1


def _number(v):
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a number: {v!r}") from None
    return v


Num = Annotated[float, BeforeValidator(_number)]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --------------------------------------------------------------- schedules


class PowerSpec(Strict):
    c: Num
    a: Num


class GeometricSpec(Strict):
    c: Num
    r: Num


class ScheduleSpec(Strict):
    """One of ``constant: c``, ``power: {c, a}`` (``c (k+1)^-a``) or
    ``geometric: {c, r}`` (``c r^k``)."""

    constant: Optional[Num] = None
    power: Optional[PowerSpec] = None
    geometric: Optional[GeometricSpec] = None

    @model_validator(mode="after")
    def _one(self):
        given = [f for f in ("constant", "power", "geometric") if getattr(self, f) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of constant, power, geometric")
        return self

    def build(self) -> schedules.Rate:
        if self.constant is not None:
            return schedules.constant(self.constant)
        if self.power is not None:
            return schedules.power(self.power.c, self.power.a)
        return schedules.geometric(self.geometric.c, self.geometric.r)


Index = Annotated[int, Field(ge=1)]
Pair = Annotated[list[Index], Field(min_length=2, max_length=2)]


def _check_indices(m, indices, what):
    for i in indices:
        if i > m:
            raise ValueError(f"{what} index {i} exceeds m = {m}")


# ------------------------------------------------------------------ models


class EdgeClassSpec(Strict):
    pairs: Optional[list[Pair]] = None
    within: Optional[list[list[Index]]] = None
    between: Optional[Annotated[list[list[Index]], Field(min_length=2, max_length=2)]] = None
    all: Optional[bool] = None
    rate: Union[Literal["remainder"], ScheduleSpec]

    @model_validator(mode="after")
    def _one(self):
        given = [f for f in ("pairs", "within", "between", "all") if getattr(self, f) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of pairs, within, between, all")
        return self

    def pair_list(self, m):
        """0-based pairs ``(i, j)`` with ``i < j``."""
        if self.pairs is not None:
            out = [(a - 1, b - 1) for a, b in self.pairs]
        elif self.within is not None:
            out = [(g[x] - 1, g[y] - 1) for g in self.within for x in range(len(g)) for y in range(x + 1, len(g))]
        elif self.between is not None:
            out = [(a - 1, b - 1) for a in self.between[0] for b in self.between[1]]
        else:
            out = [(i, j) for i in range(m) for j in range(i + 1, m)]
        return out

    def indices(self):
        groups = self.pairs or self.within or self.between or []
        return [i for g in groups for i in g]


class ModelBase(Strict):
    identity_prefix: Annotated[int, Field(ge=0)] = 0


class GossipSpec(ModelBase):
    kind: Literal["gossip"]
    m: Annotated[int, Field(ge=2)]
    edges: Annotated[list[EdgeClassSpec], Field(min_length=1)]

    @model_validator(mode="after")
    def _in_range(self):
        for e in self.edges:
            _check_indices(self.m, e.indices(), "edge")
        return self

    def build_base(self):
        classes = [
            md.EdgeClass(e.pair_list(self.m), None if e.rate == "remainder" else e.rate.build()) for e in self.edges
        ]
        return md.Gossip(self.m, md.GossipSchedule(self.m, classes))


class GraphSpec(Strict):
    named: Optional[Literal["ring", "path", "complete"]] = None
    edges: Optional[list[Pair]] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.named is None) == (self.edges is None):
            raise ValueError("give exactly one of named, edges")
        return self

    def adjacency(self, m):
        if self.named == "ring":
            return md.ring_graph(m)
        if self.named == "path":
            return md.path_graph(m)
        if self.named == "complete":
            return md.complete_graph(m)
        return md.graph_from_edges(m, [(a - 1, b - 1) for a, b in self.edges])


class BroadcastSpec(ModelBase):
    kind: Literal["broadcast_gossip"]
    m: Annotated[int, Field(ge=2)]
    topology: Annotated[list[GraphSpec], Field(min_length=1)]
    mixing: ScheduleSpec

    @model_validator(mode="after")
    def _in_range(self):
        for g in self.topology:
            _check_indices(self.m, [i for p in (g.edges or []) for i in p], "edge")
        return self

    def build_base(self):
        graphs = np.stack([g.adjacency(self.m) for g in self.topology])
        return md.BroadcastGossip(self.m, graphs, self.mixing.build())


class LinkFailureSpec(ModelBase):
    kind: Literal["link_failure"]
    base: "ModelSpec"
    failure: Optional[ScheduleSpec] = None
    survival: Optional[ScheduleSpec] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.failure is None) == (self.survival is None):
            raise ValueError("give exactly one of failure, survival")
        return self

    def build_base(self):
        return md.LinkFailure(
            build_model(self.base),
            failure=None if self.failure is None else self.failure.build(),
            survival=None if self.survival is None else self.survival.build(),
        )


class SequenceSpec(ModelBase):
    kind: Literal["deterministic_sequence"]
    matrices: Annotated[list[list[list[Num]]], Field(min_length=1)]

    def build_base(self):
        return md.DeterministicSequence([np.array(M, dtype=float) for M in self.matrices])


class PermutationSpec(ModelBase):
    kind: Literal["permutation"]
    m: Annotated[int, Field(ge=1)]

    def build_base(self):
        return md.Permutation(self.m)


class SimplexRowSpec(ModelBase):
    kind: Literal["simplex_row"]

    def build_base(self):
        return md.SimplexRow()


class HarmonicSpec(ModelBase):
    kind: Literal["harmonic_pair"]

    def build_base(self):
        return md.HarmonicPair()


ModelSpec = Annotated[
    Union[GossipSpec, BroadcastSpec, LinkFailureSpec, SequenceSpec, PermutationSpec, SimplexRowSpec, HarmonicSpec],
    Field(discriminator="kind"),
]
LinkFailureSpec.model_rebuild()


def build_model(spec) -> md.ChainModel:
    model = spec.build_base()
    if spec.identity_prefix:
        model = md.IdentityPrefix(model, spec.identity_prefix)
    return model


# ---------------------------------------------------------------- analyses

Mode = Literal["expected", "sampled"]
T0List = Annotated[list[Annotated[int, Field(ge=0)]], Field(min_length=1)]


class FlowGraphSpec(Strict):
    mode: Mode = "expected"
    horizon: Annotated[int, Field(ge=1)] = 2**14
    threshold: Annotated[float, Field(gt=0)] = 0.1
    use_descriptor: bool = True
    cross_check: bool = True


class PropertiesSpec(Strict):
    steps: Annotated[int, Field(ge=1)] = 32
    estimator: Literal["closed_form", "monte_carlo"] = "closed_form"
    samples: Annotated[int, Field(ge=2)] = 4096


class M2Spec(Strict):
    x0: Union[Literal["basis"], list[Num]] = "basis"
    t0: T0List = [0, 7]
    horizon: Annotated[int, Field(ge=1)] = 2**14
    trials: Annotated[int, Field(ge=1)] = 200


class SimulateSpec(Strict):
    x0: list[Num]
    t0: Annotated[int, Field(ge=0)] = 0
    horizon: Annotated[int, Field(ge=1)]
    trial: Annotated[int, Field(ge=0)] = 0
    csv: bool = True
    checkpoints: Annotated[int, Field(ge=2)] = 60


class EmpiricalSpec(Strict):
    trials: Annotated[int, Field(ge=1)] = 100
    horizon: Annotated[int, Field(ge=1)] = 4000
    t0: T0List = [0, 7]
    epsilon: Annotated[float, Field(gt=0)] = 1e-6
    agreement: Annotated[float, Field(gt=0, le=1)] = 0.99
    window: Annotated[float, Field(gt=0, le=1)] = 0.1


class VerifySpec(EmpiricalSpec):
    flow_mode: Mode = "expected"
    flow_horizon: Annotated[int, Field(ge=1)] = 2**14
    threshold: Annotated[float, Field(gt=0)] = 0.1
    hypothesis_steps: Annotated[int, Field(ge=1)] = 32


class AgainstSpec(Strict):
    """The chain compared with the scenario's model."""

    diagonal: Optional[Union[Literal["predicted"], list[list[Index]]]] = None
    identity_prefix: Optional[Annotated[int, Field(ge=0)]] = None
    identity: Optional[bool] = None

    @model_validator(mode="after")
    def _one(self):
        given = [f for f in ("diagonal", "identity_prefix", "identity") if getattr(self, f) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of diagonal, identity_prefix, identity")
        return self


class ApproxCompareSpec(Strict):
    against: AgainstSpec
    mode: Mode = "expected"
    horizon: Annotated[int, Field(ge=1)] = 2**14
    threshold: Annotated[float, Field(gt=0)] = 0.1
    lp: Optional[Annotated[float, Field(gt=1)]] = None
    empirical: Optional[EmpiricalSpec] = None


ANALYSES = ("flow_graph", "properties", "m2", "simulate", "verify", "approx_compare")


class AnalysisItem(Strict):
    flow_graph: Optional[FlowGraphSpec] = None
    properties: Optional[PropertiesSpec] = None
    m2: Optional[M2Spec] = None
    simulate: Optional[SimulateSpec] = None
    verify: Optional[VerifySpec] = None
    approx_compare: Optional[ApproxCompareSpec] = None

    @model_validator(mode="before")
    @classmethod
    def _empty_params(cls, data):
        # "- flow_graph:" with no parameters means defaults
        if isinstance(data, dict):
            return {k: ({} if v is None and k in ANALYSES else v) for k, v in data.items()}
        return data

    @model_validator(mode="after")
    def _one(self):
        given = [f for f in ANALYSES if getattr(self, f) is not None]
        if len(given) != 1:
            raise ValueError(f"each analysis entry needs exactly one of {', '.join(ANALYSES)}")
        return self

    @property
    def name(self) -> str:
        return next(f for f in ANALYSES if getattr(self, f) is not None)

    @property
    def params(self):
        return getattr(self, self.name)


class Scenario(Strict):
    name: Annotated[str, Field(pattern=r"^[A-Za-z0-9_.-]+$")]
    construct_: str = Field("", alias="construct")
    description: str = ""
    seed: Annotated[int, Field(ge=0)] = 0
    model: ModelSpec
    analyses: Annotated[list[AnalysisItem], Field(min_length=1)]
    fail_on_mismatch: bool = False

    @model_validator(mode="after")
    def _dimensions(self):
        m = self.build_model().m
        for item in self.analyses:
            p = item.params
            x0 = getattr(p, "x0", None)
            if isinstance(x0, list) and len(x0) != m:
                raise ValueError(f"{item.name}.x0 has length {len(x0)}, model has m = {m}")
            if item.name == "approx_compare" and isinstance(p.against.diagonal, list):
                flat = sorted(i for b in p.against.diagonal for i in b)
                if flat != list(range(1, m + 1)):
                    raise ValueError(f"diagonal pattern {p.against.diagonal} is not a partition of 1..{m}")
        return self

    def build_model(self) -> md.ChainModel:
        return build_model(self.model)


# ----------------------------------------------------------------- loading


def _line_map(node, path=(), out=None):
    """1-based source line of every key and list item, by path."""
    if out is None:
        out = {(): node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (k.value,)
            out[p] = k.start_mark.line + 1
            _line_map(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = path + (i,)
            out[p] = v.start_mark.line + 1
            _line_map(v, p, out)
    return out


def _data_path(loc, data):
    """Drop the union tags pydantic inserts into error locations."""
    path = []
    cur = data
    for part in loc:
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
            path.append(part)
        elif isinstance(cur, list) and isinstance(part, int) and part < len(cur):
            cur = cur[part]
            path.append(part)
        elif isinstance(cur, dict) and isinstance(part, str) and not _is_tag(part):
            path.append(part)  # missing or unknown key
            cur = None
    return tuple(path)


_TAGS = {"gossip", "broadcast_gossip", "link_failure", "deterministic_sequence", "permutation", "simplex_row",
         "harmonic_pair", "str", "literal['remainder']", "ScheduleSpec", "list[list[int]]", "literal['predicted']",
         "list[float]", "literal['basis']", "function-before[_number(), float]"}


def _is_tag(part):
    return part in _TAGS or part.startswith(("literal[", "list[", "function-"))


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                         line=None if mark is None else mark.line + 1, source=source) from None
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping", line=1, source=source)
    lines = _line_map(node)
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        errors = sorted(exc.errors(), key=lambda e: (e["type"] != "extra_forbidden", -len(e["loc"])))
        err = errors[0]
        path = _data_path(err["loc"], data)
        if err["type"] in ("union_tag_invalid", "union_tag_not_found"):
            path = path + ("kind",)
        line = None
        for n in range(len(path), -1, -1):
            if path[:n] in lines:
                line = lines[path[:n]]
                break
        field = ".".join(str(p) for p in path) or None
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key '{path[-1]}'"
        elif err["type"] == "missing":
            msg = "required key is missing"
        more = len(exc.errors()) - 1
        if more:
            msg += f" (and {more} more error{'s' if more > 1 else ''})"
        raise ParseError(msg, field=field, line=line, source=source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc.strerror}", source=str(path)) from None
    return parse_scenario(text, source=str(path))


def scenario_echo(scenario: Scenario) -> dict:
    return scenario.model_dump(mode="json", by_alias=True)
