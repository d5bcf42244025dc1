"""Cross-modal manifold alignment from partial correspondences and
nearest-neighbour retrieval in the learnt joint space."""

__version__ = "0.1.0"
