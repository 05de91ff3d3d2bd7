"""Exception hierarchy shared by every stage of the pipeline."""


class QlfcError(Exception):
    """Base class for all structured errors raised by this package."""


class QsimError(QlfcError):
    """Invalid circuit, gate, or sampling request."""


class VqcError(QlfcError):
    """Malformed model, parameter vector, or dataset."""


class PlantError(QlfcError):
    """Invalid plant configuration or simulation request."""


class DivergenceError(PlantError):
    """The plant state became non-finite during integration."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"plant state diverged at t = {time:.6g} s")


class ExpertError(QlfcError):
    """Expert search or replay generation failed."""


class TrainError(QlfcError):
    """Training or evaluation could not proceed."""


class ConfigError(QlfcError):
    """A configuration document is malformed."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ArtifactError(QlfcError):
    """A required input artifact is missing or unreadable."""
