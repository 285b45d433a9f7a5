"""Semiclassical eigenvalue asymptotics of the Neumann magnetic Laplacian
near the apparent contour of a smooth 3D body in a constant field."""

__version__ = "0.1.0"
