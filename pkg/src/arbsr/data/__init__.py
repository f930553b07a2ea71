"""Image I/O, bicubic degradation and training-batch construction."""
from .bicubic import bicubic_resize, bicubic_resize_backward, cubic, resize_matrix
from .imageio import (
    list_images,
    load_corpus,
    read_image,
    read_pgm,
    to_image,
    to_tensor,
    write_image,
    write_pgm,
)
from .sampling import (
    ASYMMETRIC_SCALES,
    INTEGER_SCALES,
    SYMMETRIC_SCALES,
    TrainSample,
    collate,
    degrade,
    hr_patch_size,
    make_batch,
    sample_scale,
)
from .synthetic import synthetic_corpus, synthetic_image
