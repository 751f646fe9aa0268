"""Runtime configuration for one adapter process."""

from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    """Everything a serving loop needs to answer SAMPLE requests.

    ``model_source`` is a registry name (``builtin:linear``) or a
    TorchScript file (``script:/path/model.pt``); ``dataset_source`` a
    point resolver spec (``synthetic``, ``bundle:points.pt``,
    ``cifar:/path/cifar-10-batches-py``).  ``device`` is a hint: "cpu",
    "cuda", or "auto".
    """

    model_source: str
    dataset_source: str
    num_classes: int = 10
    batch_size: int = 256
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size!r}")
        if self.device not in ("cpu", "cuda", "auto"):
            raise ValueError(f"device must be cpu, cuda, or auto, got {self.device!r}")
