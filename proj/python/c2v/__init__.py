"""Python bindings for the ReLU network verifier."""

from ._core import (
    BoxDomain,
    HullCut,
    HullInstance,
    InvariantError,
    Network,
    ParseError,
    classify,
    eval_network,
    exact_max,
    format_network,
    generate_random_network,
    interval_bounds,
    load_network,
    methods,
    output_upper_bound,
    parse_network,
    save_network,
    verify,
)

__all__ = [
    "BoxDomain",
    "HullCut",
    "HullInstance",
    "InvariantError",
    "Network",
    "ParseError",
    "classify",
    "eval_network",
    "exact_max",
    "format_network",
    "generate_random_network",
    "interval_bounds",
    "load_network",
    "methods",
    "output_upper_bound",
    "parse_network",
    "save_network",
    "verify",
]
