"""Variational quantum classifier that schedules PI gains for diesel-generator
secondary frequency control, with the plant, expert labeller and harness
needed to train and deploy it."""

from .errors import (
    ArtifactError,
    ConfigError,
    DivergenceError,
    ExpertError,
    PlantError,
    QlfcError,
    QsimError,
    TrainError,
    VqcError,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "ConfigError",
    "DivergenceError",
    "ExpertError",
    "PlantError",
    "QlfcError",
    "QsimError",
    "TrainError",
    "VqcError",
    "__version__",
]
