"""The serving side of the smoothcert external-oracle wire protocol (v1).

Line-oriented over stdin/stdout, UTF-8, LF terminators:

    in:  HELLO smoothcert-oracle 1
    out: READY <num_classes>
    in:  SAMPLE <point_id> <n> <seed> <sigma>
    out: COUNTS <point_id> <k> <class>:<count> ...   (counts sum to n)
         or ERROR <message>
    in:  BYE                                         (exit 0)

Any other handshake line is refused with a nonzero exit.  Noise for a
SAMPLE is keyed by (seed, point_id), so replaying the identical request
line reproduces the identical counts on fixed hardware.
"""

import hashlib
import sys
from typing import IO

import torch

from .config import AdapterConfig
from .datasets import UnknownPointError, load_points
from .models import load_model, pick_device

HANDSHAKE = "HELLO smoothcert-oracle 1"

# noise is generated in fixed-size draw blocks so the counts never
# depend on the forward-pass batch size
_NOISE_BLOCK = 256


def _request_seed(seed: int, point_id: str) -> int:
    digest = hashlib.blake2b(
        f"sample:{seed}:{point_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") & 0x7FFF_FFFF_FFFF_FFFF


def _count_votes(
    model: torch.nn.Module,
    base: torch.Tensor,
    n: int,
    sigma: float,
    seed: int,
    point_id: str,
    batch_size: int,
    device: torch.device,
    num_classes: int,
) -> dict[int, int]:
    gen = torch.Generator().manual_seed(_request_seed(seed, point_id))
    counts = torch.zeros(num_classes, dtype=torch.long)
    base = base.unsqueeze(0)
    done = 0
    with torch.no_grad():
        while done < n:
            block = min(_NOISE_BLOCK, n - done)
            noise = torch.randn((block, *base.shape[1:]), generator=gen)
            noisy = (base + sigma * noise).to(device)
            for lo in range(0, block, batch_size):
                logits = model(noisy[lo : lo + batch_size])
                if logits.shape[1] != num_classes:
                    raise RuntimeError(
                        f"model emits {logits.shape[1]} classes, config says {num_classes}"
                    )
                votes = logits.argmax(dim=1).cpu()
                counts += torch.bincount(votes, minlength=num_classes)
            done += block
    return {label: int(c) for label, c in enumerate(counts) if c > 0}


def _format_counts(point_id: str, counts: dict[int, int]) -> str:
    pairs = " ".join(f"{label}:{counts[label]}" for label in sorted(counts))
    return f"COUNTS {point_id} {len(counts)} {pairs}"


def serve(
    config: AdapterConfig,
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
) -> int:
    """Run the protocol loop until BYE or EOF; returns the exit code."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout

    points = load_points(config.dataset_source)
    device = pick_device(config.device)
    model = load_model(config.model_source, config.num_classes, points.shape).to(device)
    # run metadata on stderr so the protocol stream stays clean
    print(
        f"smoothcert-adapter: model={config.model_source} dataset={config.dataset_source} "
        f"classes={config.num_classes} device={device.type}",
        file=sys.stderr,
        flush=True,
    )

    opening = stdin.readline()
    if opening.rstrip("\n") != HANDSHAKE:
        print(
            f"smoothcert-adapter: bad handshake {opening.rstrip()!r}",
            file=sys.stderr,
            flush=True,
        )
        return 2
    print(f"READY {config.num_classes}", file=stdout, flush=True)

    for line in stdin:
        line = line.rstrip("\n")
        if line == "BYE":
            return 0
        fields = line.split()
        if not fields:
            continue
        if fields[0] != "SAMPLE" or len(fields) != 5:
            print(f"ERROR unsupported line {fields[0]!r}", file=stdout, flush=True)
            continue
        _, point_id, n_text, seed_text, sigma_text = fields
        try:
            n = int(n_text)
            seed = int(seed_text)
            sigma = float(sigma_text)
            if n < 1 or sigma < 0.0:
                raise ValueError(f"bad request numbers n={n_text} sigma={sigma_text}")
            base = points.get(point_id)
            counts = _count_votes(
                model, base, n, sigma, seed, point_id,
                config.batch_size, device, config.num_classes,
            )
        except UnknownPointError:
            print(f"ERROR unknown point {point_id}", file=stdout, flush=True)
            continue
        except Exception as exc:
            print(f"ERROR {exc}", file=stdout, flush=True)
            continue
        print(_format_counts(point_id, counts), file=stdout, flush=True)
    return 0
