"""Visual-crowding stimuli, foveation, classification and analysis."""

from ._core import (
    ConfigError,
    DataError,
    DivergenceError,
    Model,
    acuity_scales,
    apply_acuity,
    bouma_theoretical,
    fit_psychometric,
    flanked_count,
    psychometric,
    render_stimulus,
    spacing_curve,
    spearman,
    synth_background,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DivergenceError",
    "Model",
    "acuity_scales",
    "apply_acuity",
    "bouma_theoretical",
    "fit_psychometric",
    "flanked_count",
    "psychometric",
    "render_stimulus",
    "spacing_curve",
    "spearman",
    "synth_background",
]
