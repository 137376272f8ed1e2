# SPDX-License-Identifier: Apache-2.0
"""Federated learning simulator with label-masking distillation.

The heavy lifting lives in the C++ extension; this package re-exports its
surface: the loss family (cross_entropy, kd_loss, ntd_loss, lmd_loss,
label_smoothing_loss), masked distributions, Non-IID partitioners, dataset
builders, and the round-loop runner.
"""

from ._fedlmd import (  # noqa: F401
    ClientPartition,
    ConfigError,
    DataError,
    Dataset,
    MaskError,
    Model,
    PartitionError,
    ShapeError,
    __version__,
    cross_entropy,
    fixed_minority_vector,
    gradcheck,
    kd_loss,
    label_smoothing_loss,
    lmd_loss,
    load_csv_dataset,
    load_idx_dataset,
    masked_student_dist,
    masked_teacher_dist,
    ntd_loss,
    partition_lda,
    partition_sharding,
    run_from_config,
    softmax_with_temperature,
    speedup,
    synth_gaussian_dataset,
    synth_image_dataset,
)
