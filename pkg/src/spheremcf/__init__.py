"""Mean curvature flow with surgery of pinched hypersurfaces in spheres, SO(n)-symmetric reduction."""
from __future__ import annotations

from .geometry_core import FlowParams, PrincipalCurvatures, derive_constants
from .flow_controller import RunConfig, RunReport, run

__all__ = ["FlowParams", "PrincipalCurvatures", "RunConfig", "RunReport", "derive_constants", "run"]
__version__ = "0.1.0"
