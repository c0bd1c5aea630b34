# Backside-image refinement: warped-feature conditioned style generator
from .encoder import ResidualBlock, SourceEncoder, encode_source
from .warping import resample_warp, warp_features
from .style_block import StyleBlock, standardize, style_block
from .generator import DESK_CHANNELS, FeaturePyramid, RefineGenerator, refine_forward, resize_mask
from .discriminator import Discriminator
from .trainer import RefinePair, RefinerTrainer, build_generator, refiner_adam, train_refiner

__all__ = [
    'ResidualBlock', 'SourceEncoder', 'encode_source', 'resample_warp', 'warp_features',
    'StyleBlock', 'standardize', 'style_block', 'DESK_CHANNELS', 'FeaturePyramid',
    'RefineGenerator', 'refine_forward', 'resize_mask', 'Discriminator', 'RefinePair',
    'RefinerTrainer', 'build_generator', 'refiner_adam', 'train_refiner',
]
