"""Scriptable stand-in for an external vote oracle, protocol v1.

Speaks the line protocol on stdin/stdout: HELLO -> READY, SAMPLE -> COUNTS
or ERROR, BYE -> exit.  Flags inject the misbehaviors the client must
detect.  Stdlib only; run as ``python mock_adapter.py [flags]``.
"""

import argparse
import random
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--pa", type=float, default=0.9)
    parser.add_argument("--ready-line", default=None, help="override the READY reply")
    parser.add_argument("--fail-point", default=None, help="answer ERROR for this point")
    parser.add_argument("--wrong-sum", action="store_true", help="short every tally by one vote")
    parser.add_argument("--exit-code", type=int, default=0, help="status to exit with on BYE")
    args = parser.parse_args()

    hello = sys.stdin.readline().strip()
    if hello != "HELLO smoothcert-oracle 1":
        # an adapter must refuse clients it does not understand
        sys.stderr.write(f"unexpected handshake: {hello!r}\n")
        return 2
    print(args.ready_line if args.ready_line is not None else f"READY {args.classes}", flush=True)

    for line in sys.stdin:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "BYE":
            return args.exit_code
        if parts[0] != "SAMPLE" or len(parts) != 5:
            print("ERROR cannot parse request", flush=True)
            continue
        _, point_id, n_text, seed_text, _sigma = parts
        n = int(n_text)
        if args.fail_point is not None and point_id == args.fail_point:
            print(f"ERROR scripted failure for {point_id}", flush=True)
            continue
        # deterministic per (seed, point): good enough for a mock
        rng = random.Random(f"{seed_text}:{point_id}")
        top = sum(1 for _ in range(n) if rng.random() < args.pa)
        counts = {0: top}
        for i in range(n - top):
            label = 1 + (i % (args.classes - 1))
            counts[label] = counts.get(label, 0) + 1
        if args.wrong_sum and counts[0] > 0:
            counts[0] -= 1
        pairs = " ".join(f"{label}:{count}" for label, count in sorted(counts.items()) if count > 0)
        k = sum(1 for c in counts.values() if c > 0)
        print(f"COUNTS {point_id} {k} {pairs}".rstrip(), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
