"""Hand joint angles to surgical tool state: kinematics, learning and analysis."""

__version__ = "0.1.0"
