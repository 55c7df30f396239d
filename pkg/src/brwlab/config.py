"""Experiment configuration: JSON schema, validation and object construction.

One JSON document drives every suite.  Field names of the law sub-schema are
part of the external interface: {"family": ..., "count": ..., "displacement":
{...}} with "atoms" for the finite-atomic family.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional

import jsonschema
import numpy as np

from . import rng as rngmod
from .engine import TopK, Window
from .errors import ConfigError
from .laws import Gaussian, Laplace, PointMasses, ReproductionLaw
from .martingales import ClampedRamp, ConstantFn, CosineBump
from .spine import EndpointBox, EndpointGaussBump, EndpointIndicatorBelow, OneFunctional

SUITES = (
    "params", "simulate", "max-law", "slow-max-law", "mean-exploratory",
    "clt", "decoration", "spine-check",
)

_DISPLACEMENT_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "kind": {"const": "gaussian"},
                "mean": {"type": "number"},
                "variance": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "properties": {"kind": {"const": "laplace"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "kind": {"const": "point_masses"},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "probs": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "required": ["kind", "values", "probs"],
            "additionalProperties": False,
        },
    ],
}

_LAW_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["deterministic", "poisson", "finite_atomic"]},
        "count": {"type": "number"},
        "displacement": _DISPLACEMENT_SCHEMA,
        "atoms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "prob": {"type": "number", "minimum": 0},
                    "points": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                },
                "required": ["prob", "points"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["family"],
    "additionalProperties": False,
}

_TEST_FUNCTION_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "kind": {"const": "ramp"},
                "lo": {"type": "number"},
                "hi": {"type": "number"},
            },
            "required": ["kind", "lo", "hi"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "kind": {"const": "bump"},
                "center": {"type": "number"},
                "halfwidth": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind", "center", "halfwidth"],
            "additionalProperties": False,
        },
        {
            "properties": {"kind": {"const": "constant"}, "value": {"type": "number"}},
            "required": ["kind", "value"],
            "additionalProperties": False,
        },
    ],
}

_PATH_FUNCTIONAL_SCHEMA = {
    "type": "object",
    "oneOf": [
        {"properties": {"kind": {"const": "one"}},
         "required": ["kind"], "additionalProperties": False},
        {"properties": {"kind": {"const": "below"}, "bound": {"type": "number"}},
         "required": ["kind", "bound"], "additionalProperties": False},
        {"properties": {"kind": {"const": "box"}, "lo": {"type": "number"},
                        "hi": {"type": "number"}},
         "required": ["kind", "lo", "hi"], "additionalProperties": False},
        {"properties": {"kind": {"const": "gauss"}, "center": {"type": "number"},
                        "scale": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["kind", "center"], "additionalProperties": False},
    ],
}

SCHEMA = {
    "type": "object",
    "properties": {
        "suite": {"enum": list(SUITES)},
        "laws": {"type": "array", "items": _LAW_SCHEMA, "minItems": 1, "maxItems": 2},
        "t": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "horizons": {
            "type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1,
        },
        "replicates": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "pruning": {
            "type": "object",
            "oneOf": [
                {"properties": {"kind": {"const": "none"}},
                 "required": ["kind"], "additionalProperties": False},
                {"properties": {"kind": {"const": "window"},
                                "w": {"type": "number", "exclusiveMinimum": 0}},
                 "required": ["kind"], "additionalProperties": False},
                {"properties": {"kind": {"const": "topk"},
                                "k": {"type": "integer", "minimum": 1}},
                 "required": ["kind", "k"], "additionalProperties": False},
            ],
        },
        "output_dir": {"type": "string"},
        "allow_partial": {"type": "boolean"},
        "options": {
            "type": "object",
            "properties": {
                "theta": {"type": "number", "exclusiveMinimum": 0},
                "test_function": _TEST_FUNCTION_SCHEMA,
                "truncation_grid": {"type": "array",
                                    "items": {"type": "number"}, "minItems": 1},
                "cauchy_horizons": {"type": "array",
                                    "items": {"type": "integer", "minimum": 2},
                                    "minItems": 2, "maxItems": 2},
                "truncation_horizon": {"type": "integer", "minimum": 2},
                "truncation_replicates": {"type": "integer", "minimum": 1},
                "target_accepts": {"type": "integer", "minimum": 1},
                "budget": {"type": "integer", "minimum": 1},
                "depth_window": {"type": "number", "exclusiveMinimum": 0},
                "w_horizon": {"type": "integer", "minimum": 2},
                "w_replicates": {"type": "integer", "minimum": 2},
                "fit_bootstrap": {"type": "integer", "minimum": 1},
                "selection_trials": {"type": "integer", "minimum": 1},
                "marginal_horizon": {"type": "integer", "minimum": 1},
                "marginal_samples": {"type": "integer", "minimum": 2},
                "growth_horizon": {"type": "integer", "minimum": 1},
                "growth_replicates": {"type": "integer", "minimum": 2},
                "many_to_one": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "g": _PATH_FUNCTIONAL_SCHEMA,
                            "n": {"type": "integer", "minimum": 1},
                            "reps": {"type": "integer", "minimum": 1},
                        },
                        "required": ["g", "n", "reps"],
                        "additionalProperties": False,
                    },
                },
                "binary_dump": {"type": "boolean"},
                "runtime_bound_seconds": {"type": "number", "exclusiveMinimum": 0},
                "work_budget_factor": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "required": ["suite", "laws", "replicates", "master_seed"],
    "additionalProperties": False,
}


def law_from_config(doc: dict) -> ReproductionLaw:
    family = doc["family"]
    if family == "finite_atomic":
        atoms = tuple((a["prob"], tuple(a["points"])) for a in doc["atoms"])
        return ReproductionLaw("finite_atomic", atoms=atoms)
    if "count" not in doc:
        raise ConfigError(f"$.laws[*].count: required for family {family!r}")
    disp_doc = doc.get("displacement")
    if disp_doc is None:
        raise ConfigError(f"$.laws[*].displacement: required for family {family!r}")
    kind = disp_doc["kind"]
    if kind == "gaussian":
        disp = Gaussian(disp_doc.get("mean", 0.0), disp_doc.get("variance", 1.0))
    elif kind == "laplace":
        disp = Laplace()
    else:
        disp = PointMasses(tuple(disp_doc["values"]), tuple(disp_doc["probs"]))
    return ReproductionLaw(family, doc["count"], disp)


def test_function_from_config(doc: dict):
    if doc["kind"] == "ramp":
        return ClampedRamp(doc["lo"], doc["hi"])
    if doc["kind"] == "bump":
        return CosineBump(doc["center"], doc["halfwidth"])
    return ConstantFn(doc["value"])


def path_functional_from_config(doc: dict):
    if doc["kind"] == "one":
        return OneFunctional()
    if doc["kind"] == "below":
        return EndpointIndicatorBelow(doc["bound"])
    if doc["kind"] == "box":
        return EndpointBox(doc["lo"], doc["hi"])
    return EndpointGaussBump(doc["center"], doc.get("scale", 1.0))


def pruning_from_config(doc: Optional[dict]):
    if doc is None or doc["kind"] == "none":
        return None
    if doc["kind"] == "topk":
        return TopK(doc["k"])
    return Window(doc["w"]) if "w" in doc else "default-window"


@dataclass
class ExperimentConfig:
    raw: dict
    suite: str
    laws: List[ReproductionLaw]
    t: float
    horizons: List[int]
    replicates: int
    master_seed: int
    pruning: object
    output_dir: Optional[str]
    allow_partial: bool
    options: dict = field(default_factory=dict)

    @property
    def law1(self) -> ReproductionLaw:
        return self.laws[0]

    @property
    def law2(self) -> ReproductionLaw:
        return self.laws[-1]

    def derived_seed(self, tag: str) -> int:
        """Deterministic per-purpose sub-seed so suites draw from disjoint
        streams regardless of execution order."""
        digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
        word = int.from_bytes(digest, "little")
        return int(rngmod.mix64(np.uint64(self.master_seed) ^ np.uint64(word)))


def parse_config(doc: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"{err.json_path}: {err.message}") from None
    return ExperimentConfig(
        raw=doc,
        suite=doc["suite"],
        laws=[law_from_config(d) for d in doc["laws"]],
        t=doc.get("t", 0.5),
        horizons=sorted_horizons(doc),
        replicates=doc["replicates"],
        master_seed=doc["master_seed"],
        pruning=pruning_from_config(doc.get("pruning")),
        output_dir=doc.get("output_dir"),
        allow_partial=doc.get("allow_partial", False),
        options=doc.get("options", {}),
    )


def sorted_horizons(doc: dict) -> List[int]:
    hs = doc.get("horizons", [])
    if hs and any(b <= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("$.horizons: must be strictly increasing")
    return list(hs)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        doc = json.load(f)
    if "resolved_config" in doc:  # a manifest reruns its own resolved config
        doc = doc["resolved_config"]
    return parse_config(doc)
