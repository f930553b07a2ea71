"""Scale-aware plug-in module and the network assembled from it."""
from .checkpoint import MAGIC, CheckpointError, dumps, load_checkpoint, loads, read_header, save_checkpoint
from .config import VARIANTS, ConfigError, ModelConfig
from .grid import SamplingGrid, build_grid, project
from .layers import (
    AdaptionBlock,
    BicubicUpsampler,
    Conv2d,
    ExpertBank,
    Hourglass,
    Linear,
    MLP,
    ResBlock,
    ScaleAwareConv,
    ScaleAwareUpsampler,
)
from .network import ArbNet
