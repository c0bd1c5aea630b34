from .rays import RayBatch, gen_rays
from .sampling import importance_resample, stratified_sample
from .compositing import composite
from .render import RenderedView, render_mask, render_rays, render_view
from .warp import WarpField, read_warp, render_warp_field, write_warp

__all__ = [
    'RayBatch', 'gen_rays', 'importance_resample', 'stratified_sample', 'composite',
    'RenderedView', 'render_mask', 'render_rays', 'render_view',
    'WarpField', 'read_warp', 'render_warp_field', 'write_warp',
]
