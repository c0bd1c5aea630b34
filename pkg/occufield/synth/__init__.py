from .textures import Texture
from .primitives import PRIMITIVE_MAP, Box, Capsule, Primitive, Sphere, make_primitive
from .scene import AnalyticScene, analytic_color, analytic_occupancy
from .oracle import AnalyticField, EmptyField
from .render_gt import render_gt, render_gt_view
from .person import capsule_person
from .blobs import blob_scene
from .dataset import DatasetManager, SceneDataset, SceneRecord, make_dataset, ring_azimuths

__all__ = [
    'Texture', 'PRIMITIVE_MAP', 'Box', 'Capsule', 'Primitive', 'Sphere', 'make_primitive',
    'AnalyticScene', 'analytic_color', 'analytic_occupancy', 'AnalyticField', 'EmptyField',
    'render_gt', 'render_gt_view', 'capsule_person', 'blob_scene', 'DatasetManager', 'SceneDataset',
    'SceneRecord', 'make_dataset', 'ring_azimuths',
]
