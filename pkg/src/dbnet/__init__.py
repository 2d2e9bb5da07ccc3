"""Bicriteria approximation pipelines for degree-bounded network design:
directed Steiner trees via state-tree LP rounding and group Steiner trees
on trees via scaled recursive rounding, with exact oracles for tiny inputs.
"""

__version__ = "0.1.0"

from .instances import (DirectedInstance, GroupTreeInstance, normalize,
                        parse_dst, parse_gst, preprocess_gst, serialize_dst,
                        serialize_gst)
from .oracle import exact_dst, exact_gst

__all__ = [
    "DirectedInstance", "GroupTreeInstance", "normalize", "parse_dst",
    "parse_gst", "preprocess_gst", "serialize_dst", "serialize_gst",
    "exact_dst", "exact_gst", "__version__",
]
