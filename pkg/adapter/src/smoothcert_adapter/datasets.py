"""Point resolvers: map a protocol point_id to a model-space tensor.

All resolvers hand back tensors already in the model's preprocessed
input space; the serving loop adds the smoothing noise directly to
them (post-normalization), which is the convention virtually all
randomized-smoothing classifiers are trained under.
"""

import hashlib
import pickle
from pathlib import Path

import torch

CIFAR_SHAPE = (3, 32, 32)
# standard CIFAR-10 channel statistics
_CIFAR_MEAN = torch.tensor([0.4914, 0.4822, 0.4465]).reshape(3, 1, 1)
_CIFAR_STD = torch.tensor([0.2470, 0.2435, 0.2616]).reshape(3, 1, 1)


class UnknownPointError(KeyError):
    """The dataset has no tensor for the requested point_id."""


def _stable_seed(text: str) -> int:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFF_FFFF_FFFF_FFFF


class SyntheticPoints:
    """Infinite dataset: every point_id maps to a fixed random tensor."""

    def __init__(self, shape: tuple[int, ...] = CIFAR_SHAPE) -> None:
        self.shape = shape

    def get(self, point_id: str) -> torch.Tensor:
        gen = torch.Generator().manual_seed(_stable_seed(f"synthetic-point:{point_id}"))
        return torch.randn(self.shape, generator=gen)


class BundlePoints:
    """Points saved as a ``{point_id: tensor}`` dict via ``torch.save``."""

    def __init__(self, path: str) -> None:
        payload = torch.load(path, map_location="cpu", weights_only=True)
        if not isinstance(payload, dict) or not payload:
            raise ValueError(f"bundle {path!r} must hold a non-empty dict of tensors")
        shapes = {tuple(t.shape) for t in payload.values()}
        if len(shapes) != 1:
            raise ValueError(f"bundle tensors disagree on shape: {sorted(shapes)}")
        self.points = {str(k): v.float() for k, v in payload.items()}
        self.shape = shapes.pop()

    def get(self, point_id: str) -> torch.Tensor:
        try:
            return self.points[point_id]
        except KeyError:
            raise UnknownPointError(point_id) from None


class CifarTestPoints:
    """CIFAR-10 test split from the python-pickle batch directory.

    Ids are ``test:<index>`` with index below 10000.  Images are scaled
    to [0, 1] and normalized with the standard channel statistics.
    """

    def __init__(self, root: str) -> None:
        batch = Path(root) / "test_batch"
        if not batch.exists():
            raise FileNotFoundError(f"no test_batch under {root!r}")
        with open(batch, "rb") as fp:
            payload = pickle.load(fp, encoding="bytes")
        raw = torch.frombuffer(
            bytearray(payload[b"data"]), dtype=torch.uint8
        ).reshape(-1, 3, 32, 32)
        self.images = raw.float() / 255.0
        self.labels = [int(y) for y in payload[b"labels"]]
        self.shape = CIFAR_SHAPE

    def get(self, point_id: str) -> torch.Tensor:
        kind, _, index_text = point_id.partition(":")
        try:
            index = int(index_text)
        except ValueError:
            index = -1
        if kind != "test" or not 0 <= index < self.images.shape[0]:
            raise UnknownPointError(point_id)
        return (self.images[index] - _CIFAR_MEAN) / _CIFAR_STD


def load_points(source: str):
    """Resolve ``dataset_source`` to a points object with .get and .shape."""
    kind, _, rest = source.partition(":")
    if kind == "synthetic":
        if rest:
            dims = tuple(int(d) for d in rest.split("x"))
            if not dims or any(d < 1 for d in dims):
                raise ValueError(f"bad synthetic shape {rest!r}")
            return SyntheticPoints(dims)
        return SyntheticPoints()
    if kind == "bundle":
        if not rest:
            raise ValueError("bundle dataset needs a path: bundle:points.pt")
        return BundlePoints(rest)
    if kind == "cifar":
        if not rest:
            raise ValueError("cifar dataset needs a directory: cifar:/path")
        return CifarTestPoints(rest)
    raise ValueError(f"unknown dataset source {source!r}")
