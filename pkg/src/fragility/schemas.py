"""JSON schemas for everything the library reads or writes."""

from __future__ import annotations

from typing import Any

import jsonschema

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num}
_vec_or_null = {"type": "array", "items": _num_or_null}
_index_list = {"type": "array", "items": {"type": "integer", "minimum": 1}}

ATOM = {
    "type": "object",
    "required": ["p", "z"],
    "properties": {"p": {"type": "number", "exclusiveMinimum": 0}, "z": _vec},
}

NORM = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {
            "enum": ["lambda", "max", "marshall_olkin", "discrete_generator", "iid_uniform", "mc_generator"]
        },
        "d": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "minimum": 1},
        "theta": {"type": "number", "minimum": 0, "maximum": 1},
        "atoms": {"type": "array", "items": ATOM, "minItems": 1},
        "sampler": {"type": "string"},
        "n_samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
    },
}

MODEL = {
    "type": "object",
    "required": ["model"],
    "properties": {
        "model": {"enum": ["weighted_pareto", "gpd_copula"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "lambda": {"type": "array", "items": _vec},
        "beta": _vec,
        "kappa": {"type": "integer", "minimum": 1},
        "generator": NORM,
    },
}

EXCEEDANCE = {
    "type": "object",
    "required": ["a", "p", "fi", "fi_m", "vanishes"],
    "properties": {
        "a": _vec,
        "p": _vec,
        "fi": _num,
        "fi_m": {
            "type": "object",
            "required": ["m", "value"],
            "properties": {"m": {"type": "integer", "minimum": 1}, "value": _num_or_null},
        },
        "vanishes": {
            "type": "object",
            "required": ["m", "result", "witness"],
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "result": {"type": "boolean"},
                "witness": {"anyOf": [_index_list, {"type": "null"}]},
            },
        },
        "norm": NORM,
        "gamma": _vec,
        "kappa": {"type": "integer", "minimum": 1},
    },
}

CLUSTER = {
    "type": "object",
    "required": ["kappa", "survival", "pmf", "cdf", "mean"],
    "properties": {
        "kappa": {"type": "integer", "minimum": 1},
        "survival": _vec,
        "pmf": _vec,
        "cdf": _vec,
        "mean": _num,
        "norm": NORM,
        "gamma": _vec,
    },
}

FI = {
    "type": "object",
    "required": ["fi", "fi_m"],
    "properties": {"fi": _num, "fi_m": EXCEEDANCE["properties"]["fi_m"], "norm": NORM, "gamma": _vec},
}

VANISHES = {
    "type": "object",
    "required": ["m", "result", "witness"],
    "properties": EXCEEDANCE["properties"]["vanishes"]["properties"] | {"norm": NORM, "gamma": _vec},
}

SWEEP = {
    "type": "object",
    "required": ["model", "n", "seed", "theory", "rows"],
    "properties": {
        "model": MODEL,
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "theory": {
            "type": "object",
            "required": ["p", "fi", "gamma", "cluster"],
            "properties": {"p": _vec, "fi": _num, "gamma": _vec, "cluster": CLUSTER},
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["q", "s", "p_hat", "se", "fi_hat", "cluster", "gamma_hat"],
                "properties": {
                    "q": _num,
                    "s": _num,
                    "n_exceed": {"type": "integer"},
                    "p_hat": _vec_or_null,
                    "se": _vec_or_null,
                    "fi_hat": _num_or_null,
                    "fi_se": _num_or_null,
                    "gamma_hat": _vec_or_null,
                    "gamma_se": _vec_or_null,
                },
            },
        },
    },
}

SCHEMAS: dict[str, dict[str, Any]] = {
    "norm": NORM,
    "model": MODEL,
    "acdec": EXCEEDANCE,
    "fi": FI,
    "cluster": CLUSTER,
    "vanishes": VANISHES,
    "simulate": SWEEP,
}


def validate(kind: str, obj: Any) -> None:
    """Raise ``jsonschema.ValidationError`` if ``obj`` does not match schema ``kind``."""
    jsonschema.validate(obj, SCHEMAS[kind])
