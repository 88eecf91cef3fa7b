"""Moving-domain diffusion solver with a mass-conservative reduced order model.

The package is organised in layers:

``fem_core``
    Triangulated unit disk, piecewise linear fields, quadrature and
    form assembly on the fixed reference domain.
``ale_geometry``
    Pullback quantities of a mesh deformation (Jacobians, boundary
    normals, metric factors) and the coefficient fields they induce.
``fom_solver``
    Time stepping for the coupled boundary-motion / bulk-diffusion
    problem on the reference disk.
``reduction_offline``
    Snapshot campaigns, proper orthogonal decomposition, empirical
    interpolation of the geometry coefficients, operator projection
    and the on-disk model archive.
``rom_online``
    The reduced solver, with an optional exactly mass-conservative
    variant of the concentration update.
``harness_cli``
    Command line entry points and the numerical studies.
"""

from swellrom import errors

__all__ = ["errors"]
__version__ = "0.1.0"
