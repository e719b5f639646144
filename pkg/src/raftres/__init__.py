"""Rare-event simulation of repairable dynamic fault trees."""

from .distributions import Family, ParamError, Pdf
from .galileo import format_galileo, load, lower, parse
from .tree import FaultTree, Node, NodeKind, ValidationError

__version__ = "0.1.0"

__all__ = [
    "Family",
    "ParamError",
    "Pdf",
    "FaultTree",
    "Node",
    "NodeKind",
    "ValidationError",
    "parse",
    "lower",
    "load",
    "format_galileo",
]
