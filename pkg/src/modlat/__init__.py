"""Reduction of module lattices over towers of cyclotomic fields.

The package is organized around a doubly-recursive reduction: recursion in
the rank of the module (projected rank-2 sublattices) and recursion in the
field degree (descending along a tower of cyclotomic subfields).  A flat
block-recursive reducer handles high-rank rational lattices, and a
symplectic variant halves the work per tower level for rank-2 modules.
"""

from .tower import Tower, FieldElement, build_tower

__all__ = ["Tower", "FieldElement", "build_tower"]

__version__ = "0.1.0"
