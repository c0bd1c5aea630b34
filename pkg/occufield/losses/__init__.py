from .points import PointSampleSet, read_points, sample_points, write_points
from .reconstruction import loss_recon, loss_vol
from .refinement import apply_mask, loss_l1_masked, loss_refine_total
from .perceptual import PERCEPTUAL_WEIGHTS, PerceptualExtractor, loss_perceptual
from .adversarial import input_grad, input_grad_sqnorm, loss_gan_pair, nonsaturating_g, r1_directional
from .loss_log import LossLog, read_loss_log, window_means

__all__ = [
    'PointSampleSet', 'read_points', 'sample_points', 'write_points', 'loss_recon', 'loss_vol',
    'apply_mask', 'loss_l1_masked', 'loss_refine_total', 'PERCEPTUAL_WEIGHTS',
    'PerceptualExtractor', 'loss_perceptual', 'input_grad', 'input_grad_sqnorm', 'loss_gan_pair',
    'nonsaturating_g', 'r1_directional', 'LossLog', 'read_loss_log', 'window_means',
]
