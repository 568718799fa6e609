"""
Landslide flow on pairs of hyperbolic surface structures.
"""
