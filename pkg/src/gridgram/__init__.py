"""gridgram: context-sensitive grammar engine for 3D topologies on a bounded grid."""

from gridgram.core import (
    COMPONENTS,
    Direction,
    Grid,
    GridConfig,
    NEIGHBOR_DIRECTIONS,
    NONTERMINALS,
    Point,
    State,
    Symbol,
    TERMINALS,
    neighbor,
)

__version__ = "0.1.0"

__all__ = [
    "COMPONENTS",
    "Direction",
    "Grid",
    "GridConfig",
    "NEIGHBOR_DIRECTIONS",
    "NONTERMINALS",
    "Point",
    "State",
    "Symbol",
    "TERMINALS",
    "neighbor",
    "__version__",
]
