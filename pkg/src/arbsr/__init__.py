"""Scale-arbitrary single-image super-resolution with hand-written gradients."""
from .scale import ScalePair, parse_scale, resolve_size

__version__ = "0.1.0"
