"""Evaluation toolkit for pediatric abdominal organ-at-risk segmentation.

Volumes are numpy arrays indexed ``[i, j, k]`` with ``k`` the axial axis.
Spacing is given in millimetres per axis.
"""

from ._core import (
    ComputationError,
    IoError,
    OarError,
    ValidationError,
    bonferroni,
    distance_transform,
    dsc,
    evaluate_pair,
    hd95,
    keep_largest_component,
    label_components,
    largest_remainder,
    likert_summary_json,
    make_split,
    make_split_from_manifest,
    msd,
    organs,
    priority_order,
    quartiles,
    read_image,
    read_labels,
    resolve_overlaps,
    stars,
    surface_distances,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
    write_image,
    write_labels,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
