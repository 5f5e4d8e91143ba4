"""Dense head outputs to instance maps and nucleus records."""

from engine.m04_postproc.hovernet import edge_strength, hovernet_separate, majority_vote_types
from engine.m04_postproc.params import HoverNetParams, StarParams
from engine.m04_postproc.records import extract_records, fill_contour, trace_contour
from engine.m04_postproc.star import (
    cppnet_nms,
    rasterize_star_polygon,
    star_candidates_from_maps,
    stardist_nms,
)
from engine.m04_postproc.targets import (
    bundle_from_instances,
    hv_maps_from_instances,
    object_probability,
    paint_discs,
    radial_distances_from_instances,
)
from engine.m04_postproc.types import (
    PANNUKE_CLASSES,
    InstanceMap,
    NucleusRecord,
    StarPolygonSet,
    class_name,
)

__all__ = [
    "HoverNetParams",
    "InstanceMap",
    "NucleusRecord",
    "PANNUKE_CLASSES",
    "StarParams",
    "StarPolygonSet",
    "bundle_from_instances",
    "class_name",
    "cppnet_nms",
    "edge_strength",
    "extract_records",
    "fill_contour",
    "hovernet_separate",
    "hv_maps_from_instances",
    "majority_vote_types",
    "object_probability",
    "paint_discs",
    "radial_distances_from_instances",
    "rasterize_star_polygon",
    "star_candidates_from_maps",
    "stardist_nms",
    "trace_contour",
]
