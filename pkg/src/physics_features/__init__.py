from physics_features.violations import (
    DEFAULT_EPSILON,
    ObservedState,
    energy_violation,
    energy_violations,
    head_loss,
    hw_resistance,
    mass_violation,
    mass_violations,
    node_energy_violation,
    node_energy_violations,
)
from physics_features.features import (
    FEATURE_GROUPS,
    FEATURE_LAYOUT,
    FeatureSettings,
    FeatureTensor,
    FeatureToggles,
    InterpolationError,
    assemble_features,
    dominant_violation,
    interpolate_unmeasured,
    interpolation_weights,
    load_features,
    save_features,
)

__all__ = [
    "DEFAULT_EPSILON",
    "FEATURE_GROUPS",
    "FEATURE_LAYOUT",
    "FeatureSettings",
    "FeatureTensor",
    "FeatureToggles",
    "InterpolationError",
    "ObservedState",
    "assemble_features",
    "dominant_violation",
    "energy_violation",
    "energy_violations",
    "head_loss",
    "hw_resistance",
    "interpolate_unmeasured",
    "interpolation_weights",
    "load_features",
    "mass_violation",
    "mass_violations",
    "node_energy_violation",
    "node_energy_violations",
    "save_features",
]
