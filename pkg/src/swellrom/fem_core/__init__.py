"""Reference-domain finite element core: mesh, fields, quadrature, forms."""

from swellrom.fem_core.mesh import (
    Mesh,
    generate_disk_mesh,
    load_mesh,
    local_mesh_size,
    mesh_text,
    mesh_hash,
    save_mesh,
)
from swellrom.fem_core.quadrature import QuadratureTable, default_quadrature
from swellrom.fem_core.fields import (
    Field,
    TraceField,
    interpolate,
    interpolate_boundary,
)
from swellrom.fem_core.products import InnerProduct, inner_product_matrix
from swellrom.fem_core.assembly import FormAssembler, FORM_IDS

__all__ = [
    "Mesh",
    "generate_disk_mesh",
    "load_mesh",
    "local_mesh_size",
    "mesh_text",
    "mesh_hash",
    "save_mesh",
    "QuadratureTable",
    "default_quadrature",
    "Field",
    "TraceField",
    "interpolate",
    "interpolate_boundary",
    "InnerProduct",
    "inner_product_matrix",
    "FormAssembler",
    "FORM_IDS",
]
