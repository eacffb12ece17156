"""Teleportation channels under reference-frame uncertainty.

Constructs the effective quantum channels of conventional, tight, and perfect
teleportation schemes, verifies their structural properties (unitary error
basis equivariance, scheme compatibility, perfect teleportation over finite
subgroups), and reproduces the associated channel-purity figures.
"""
from __future__ import annotations

__version__ = "0.1.0"
