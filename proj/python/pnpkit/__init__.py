"""Perspective-n-Point toolkit.

Camera pose estimation from 3D-2D point correspondences: classical solvers
(EPnP, RANSAC), a learned initializer with an unrolled reweighted
Levenberg-Marquardt refiner, a synthetic scenario generator, an evaluation
harness, an operation-count model, and the dataset / weight file formats
shared with the ``pnpkit`` command-line tool.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
