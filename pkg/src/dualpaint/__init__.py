"""Two-stream texture/structure dual-generation image inpainting."""

from .bigff import BiGFF, fuse
from .cfa import ContextualAggregation, MultiScaleAggregator, aggregate, attention_scores, cfa_forward, reconstruct
from .data import (
    MaskBucket,
    Sample,
    classify_mask_ratio,
    extract_edges,
    make_sample,
    synth_dataset,
    to_grayscale,
)
from .discriminator import SNConv2d, TwoBranchDiscriminator, spectral_normalize
from .errors import CheckpointError, ConfigError, DualpaintError, InputError, NumericError
from .generator import (
    GeneratorConfig,
    GeneratorOutput,
    SingleStreamGenerator,
    StreamFeatures,
    TwoStreamGenerator,
    build_generator,
    composite,
    count_parameters,
    generate,
    inpaint,
    matched_width_multiplier,
)
from .losses import (
    LossWeights,
    RandomFeatureExtractor,
    VGGFeatureExtractor,
    adversarial_losses,
    intermediate_loss,
    joint_loss,
    perceptual_loss,
    reconstruction_loss,
    style_loss,
)
from .metrics import MetricReport, psnr, render_table, ssim
from .pconv import PartialConv2d, mask_coverage

__version__ = "0.1.0"
