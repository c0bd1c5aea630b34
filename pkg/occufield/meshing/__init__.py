from .mesh import TriMesh
from .marching import ISO_LEVEL, evaluate_grid, marching_cubes, mesh_from_grid, occupancy_function
from .colors import vertex_colors
from .metrics import (EMPTY_DISTANCE, TriangleLocator, closest_points_on_triangles, mesh_distances,
                      metric_chamfer, metric_p2s, point_triangle_distances)
from .export import MESH_FORMATS, export_mesh, load_mesh

__all__ = [
    'TriMesh', 'ISO_LEVEL', 'evaluate_grid', 'marching_cubes', 'mesh_from_grid', 'occupancy_function',
    'vertex_colors', 'EMPTY_DISTANCE', 'TriangleLocator', 'closest_points_on_triangles',
    'mesh_distances', 'metric_chamfer', 'metric_p2s', 'point_triangle_distances',
    'MESH_FORMATS', 'export_mesh', 'load_mesh',
]
