"""
Landslide flow geometry: pointwise tensors, holonomy, meshes and solvers.
"""
