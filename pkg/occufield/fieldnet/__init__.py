from .encoding import encoded_size, positional_encode
from .network import FieldNetwork, FieldOutput, field_eval
from .compositing import composite_color_fusion, composite_color_initial, gamma_visualization
from .bundle import BoundField, FieldBundle, FieldQuery

__all__ = [
    'encoded_size', 'positional_encode', 'FieldNetwork', 'FieldOutput', 'field_eval',
    'composite_color_fusion', 'composite_color_initial', 'gamma_visualization',
    'BoundField', 'FieldBundle', 'FieldQuery',
]
