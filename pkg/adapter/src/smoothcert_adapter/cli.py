"""Command-line front end: parse flags, then hand off to the serve loop."""

import argparse
import sys

from .config import AdapterConfig
from .protocol import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothcert-adapter",
        description="Serve a torch classifier over the smoothcert oracle protocol.",
    )
    parser.add_argument(
        "--model", required=True, help="builtin:linear | script:/path/model.pt"
    )
    parser.add_argument(
        "--data",
        required=True,
        help="synthetic[:CxHxW] | bundle:points.pt | cifar:/path/cifar-10-batches-py",
    )
    parser.add_argument("--classes", type=int, default=10, help="class count the model emits")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--device", choices=("cpu", "cuda", "auto"), default="cpu")
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model_source=args.model,
            dataset_source=args.data,
            num_classes=args.classes,
            batch_size=args.batch_size,
            device=args.device,
        )
        code = serve(config)
    except (ValueError, OSError) as exc:
        print(f"smoothcert-adapter: {exc}", file=sys.stderr)
        code = 2
    raise SystemExit(code)


if __name__ == "__main__":
    main()
