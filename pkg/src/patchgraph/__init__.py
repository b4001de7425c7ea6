"""Images as patch-cluster adjacency graphs, classified with an edge-aware GNN."""

__version__ = "0.1.0"
