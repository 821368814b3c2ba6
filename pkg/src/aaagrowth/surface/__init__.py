from .mesh import (Centerline, TriMesh, VascularModel, FEATURE_NAMES, REGIONS,
                   REGION_CODE, load_centerline, load_ply, save_centerline,
                   save_ply, tangent_plane, tangent_planes)
from .sampling import cluster_assign, farthest_point_sample
from .metrics import arc_length, chamfer, hd95, rgvd
from .geodesic import heat_geodesic
from .measure import (closest_surface_distance, closest_surface_points,
                      local_radius, max_diameter, point_surface_distance,
                      region_volume)
from .align import icp_align, kabsch_fit

__all__ = [
    "Centerline", "TriMesh", "VascularModel", "FEATURE_NAMES", "REGIONS",
    "REGION_CODE", "load_centerline", "load_ply", "save_centerline", "save_ply",
    "tangent_plane", "tangent_planes", "cluster_assign", "farthest_point_sample",
    "arc_length", "chamfer", "hd95", "rgvd", "heat_geodesic",
    "closest_surface_distance", "closest_surface_points", "local_radius",
    "max_diameter", "point_surface_distance", "region_volume", "icp_align",
    "kabsch_fit",
]
