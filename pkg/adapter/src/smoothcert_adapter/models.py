"""Classifier loading: a hermetic builtin and TorchScript checkpoints."""

import torch
from torch import nn


class FlattenLinear(nn.Module):
    """Single linear layer over the flattened input.

    Weights come from a fixed generator seed, so every process builds the
    identical model; useful as a stand-in classifier when no checkpoint
    is around (protocol tests, dry runs).
    """

    def __init__(self, in_features: int, num_classes: int) -> None:
        super().__init__()
        self.linear = nn.Linear(in_features, num_classes)
        gen = torch.Generator().manual_seed(20240917)
        with torch.no_grad():
            self.linear.weight.copy_(
                torch.randn(self.linear.weight.shape, generator=gen) / in_features**0.5
            )
            self.linear.bias.copy_(torch.randn(num_classes, generator=gen) * 0.01)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.linear(x.flatten(1))


def load_model(source: str, num_classes: int, input_shape: tuple[int, ...]) -> nn.Module:
    """Resolve ``model_source`` to an eval-mode module.

    ``builtin:linear`` needs no files; ``script:<path>`` loads TorchScript.
    """
    kind, _, rest = source.partition(":")
    if kind == "builtin":
        if rest != "linear":
            raise ValueError(f"unknown builtin model {rest!r}")
        in_features = 1
        for dim in input_shape:
            in_features *= dim
        model = FlattenLinear(in_features, num_classes)
    elif kind == "script":
        if not rest:
            raise ValueError("script model needs a path: script:/path/model.pt")
        model = torch.jit.load(rest, map_location="cpu")
    else:
        raise ValueError(f"unknown model source {source!r}")
    model.eval()
    return model


def pick_device(hint: str) -> torch.device:
    if hint == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(hint)
