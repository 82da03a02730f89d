"""Cell-type trajectories and biological change points from snapshot single-cell data."""

__version__ = "0.1.0"
