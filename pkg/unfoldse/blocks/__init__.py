"""
unfoldse.blocks

Learnable components: feature extractor, gradient estimators, parameter
initializer and fusion networks.
"""

from unfoldse.blocks.encoder import EncoderConfig, FeatureExtractor
from unfoldse.blocks.estimator import (GradientCalculator, GradientEstimator,
                                       ParameterInitializer)
from unfoldse.blocks.fusion import (FuseNet, FuseNetConfig, TargetFusion, fuse,
                                    fuse_weighted)
from unfoldse.blocks.tcn import STCNConfig, SqueezedTCN
