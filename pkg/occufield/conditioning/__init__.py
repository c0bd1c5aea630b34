from .camera import Camera, backside_azimuth
from .sampling import FeatureMap2D, FeatureVolume3D, sample_bilinear, sample_trilinear
from .proxy import ProxyVolume, read_proxy, voxelize_proxy, write_proxy
from .encoders import ImageEncoder, VolumeEncoder, encode_image, encode_volume
from .condition import build_condition, condition_size

__all__ = [
    'Camera', 'backside_azimuth', 'FeatureMap2D', 'FeatureVolume3D',
    'sample_bilinear', 'sample_trilinear', 'ProxyVolume', 'read_proxy',
    'voxelize_proxy', 'write_proxy', 'ImageEncoder', 'VolumeEncoder',
    'encode_image', 'encode_volume', 'build_condition', 'condition_size',
]
