"""Certify a batch of points and round-trip the outcomes through JSONL.

Uses a synthetic base classifier whose top-class probability varies by
point, so the batch shows all three outcome flavors: solid radii,
borderline ones, and abstentions.
"""

import io

from smoothcert import (
    Certified,
    ConfidenceSpec,
    SmoothingConfig,
    SyntheticOracle,
    certify_batch,
    read_outcomes,
    write_outcomes,
)

CONF = ConfidenceSpec(0.001)


def main() -> None:
    cfg = SmoothingConfig(sigma=0.5, conf=CONF, n=1000)
    outcomes = []
    for i, p_a in enumerate((0.99, 0.9, 0.75, 0.6, 0.52)):
        oracle = SyntheticOracle(p_a=p_a, num_classes=10)
        outcomes.extend(
            certify_batch(oracle, [f"point-{i}-{j}" for j in range(4)], cfg, seed=3)
        )

    certified = [o for o in outcomes if isinstance(o.decision, Certified)]
    abstained = len(outcomes) - len(certified)
    print(f"{len(outcomes)} points: {len(certified)} certified, {abstained} abstained")
    radii = sorted(o.decision.radius for o in certified)
    print(f"radius range {radii[0]:.4f} .. {radii[-1]:.4f}")

    buffer = io.StringIO()
    write_outcomes(outcomes, buffer)
    buffer.seek(0)
    recovered = read_outcomes(buffer)
    assert recovered == outcomes
    print("JSONL round-trip reproduced every outcome exactly.")
    first = buffer.getvalue().splitlines()[0]
    print(f"first line: {first}")


if __name__ == "__main__":
    main()
