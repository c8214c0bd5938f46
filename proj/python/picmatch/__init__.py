"""Index-score matching toolkit: estimating-equation index models, PIC-SE
calipers, within-caliper matching, and matched effect estimation."""

from ._picmatch import (
    caliper_summary,
    estimate,
    fit_index,
    generate,
    match,
    pic_se,
    z_star,
)

__all__ = [
    "caliper_summary",
    "estimate",
    "fit_index",
    "generate",
    "match",
    "pic_se",
    "z_star",
]
