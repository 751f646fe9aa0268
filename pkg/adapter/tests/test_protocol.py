"""Protocol conformance for the serving adapter.

The scripted-driver test at the top doubles as the acceptance check for
the adapter component and prints its verdict line; the rest pin the
error paths and the determinism contract.
"""

import io
import subprocess
import sys

import pytest

torch = pytest.importorskip("torch")

from smoothcert_adapter import AdapterConfig, serve  # noqa: E402

HANDSHAKE = "HELLO smoothcert-oracle 1"
BASE_ARGS = [
    sys.executable,
    "-m",
    "smoothcert_adapter.cli",
    "--model",
    "builtin:linear",
]


class Driver:
    """Line-by-line conversation with an adapter subprocess."""

    def __init__(self, *extra: str) -> None:
        self.proc = subprocess.Popen(
            [*BASE_ARGS, *extra],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )

    def say(self, line: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def hear(self) -> str:
        assert self.proc.stdout is not None
        return self.proc.stdout.readline().rstrip("\n")

    def close(self) -> int:
        if self.proc.stdin is not None and self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
        return self.proc.wait(timeout=30)


def parse_counts(line: str, point_id: str) -> dict[int, int]:
    fields = line.split()
    assert fields[0] == "COUNTS" and fields[1] == point_id
    pairs = fields[3:]
    assert int(fields[2]) == len(pairs)
    counts = {}
    for pair in pairs:
        label, _, count = pair.partition(":")
        counts[int(label)] = int(count)
    return counts


def test_scripted_protocol_session() -> None:
    failures: list[str] = []
    driver = Driver("--data", "synthetic", "--classes", "10")
    try:
        driver.say(HANDSHAKE)
        ready = driver.hear()
        if ready != "READY 10":
            failures.append(f"handshake answered {ready!r}")
        exchanges = [("alpha", 400, 7), ("beta", 251, 1), ("alpha", 400, 7)]
        replies = []
        for point_id, n, seed in exchanges:
            driver.say(f"SAMPLE {point_id} {n} {seed} 0.5")
            reply = driver.hear()
            replies.append(reply)
            counts = parse_counts(reply, point_id)
            if sum(counts.values()) != n:
                failures.append(f"{point_id}: counts sum {sum(counts.values())} != {n}")
            if any(c < 1 for c in counts.values()):
                failures.append(f"{point_id}: nonpositive count in {reply!r}")
        # first and third request lines are identical, so must the replies be
        if replies[0] != replies[2]:
            failures.append(f"replay diverged: {replies[0]!r} vs {replies[2]!r}")
        driver.say("BYE")
        code = driver.close()
        if code != 0:
            failures.append(f"exit code {code} after BYE")
    finally:
        if driver.proc.poll() is None:
            driver.proc.kill()
    print(f"[acceptance] criterion 10 (adapter protocol conformance): "
          f"{'FAIL' if failures else 'PASS'}")
    assert not failures, "; ".join(failures)


def test_single_draw_yields_single_pair() -> None:
    driver = Driver("--data", "synthetic", "--classes", "10")
    try:
        driver.say(HANDSHAKE)
        assert driver.hear() == "READY 10"
        driver.say("SAMPLE solo 1 0 0.25")
        counts = parse_counts(driver.hear(), "solo")
        assert len(counts) == 1 and sum(counts.values()) == 1
        driver.say("BYE")
        assert driver.close() == 0
    finally:
        if driver.proc.poll() is None:
            driver.proc.kill()


def test_counts_independent_of_batch_size(tmp_path) -> None:
    bundle = tmp_path / "points.pt"
    gen = torch.Generator().manual_seed(5)
    torch.save({"x": torch.randn(3, 8, 8, generator=gen)}, bundle)
    replies = []
    for batch in ("1000", "7"):
        driver = Driver(
            "--data", f"bundle:{bundle}", "--classes", "4", "--batch-size", batch
        )
        try:
            driver.say(HANDSHAKE)
            assert driver.hear() == "READY 4"
            driver.say("SAMPLE x 500 11 1.0")
            replies.append(driver.hear())
            driver.say("BYE")
            assert driver.close() == 0
        finally:
            if driver.proc.poll() is None:
                driver.proc.kill()
    assert replies[0] == replies[1]
    assert sum(parse_counts(replies[0], "x").values()) == 500


def test_unknown_point_errors_and_serving_continues(tmp_path) -> None:
    bundle = tmp_path / "points.pt"
    torch.save({"known": torch.zeros(3, 8, 8)}, bundle)
    driver = Driver("--data", f"bundle:{bundle}", "--classes", "4")
    try:
        driver.say(HANDSHAKE)
        assert driver.hear() == "READY 4"
        driver.say("SAMPLE ghost 10 0 0.5")
        assert driver.hear() == "ERROR unknown point ghost"
        driver.say("SAMPLE known 10 0 0.5")
        assert sum(parse_counts(driver.hear(), "known").values()) == 10
        driver.say("BYE")
        assert driver.close() == 0
    finally:
        if driver.proc.poll() is None:
            driver.proc.kill()


def test_bad_handshake_refused() -> None:
    driver = Driver("--data", "synthetic", "--classes", "10")
    try:
        driver.say("HELLO wrong-protocol 9")
        code = driver.close()
        assert code != 0
        assert driver.proc.stdout is not None
        assert driver.proc.stdout.read() == ""
    finally:
        if driver.proc.poll() is None:
            driver.proc.kill()


def test_serve_in_process_handshake_and_eof() -> None:
    config = AdapterConfig(model_source="builtin:linear", dataset_source="synthetic")
    out = io.StringIO()
    assert serve(config, stdin=io.StringIO("HELLO nope 1\n"), stdout=out) == 2
    assert out.getvalue() == ""

    # EOF without BYE is a clean shutdown
    out = io.StringIO()
    code = serve(config, stdin=io.StringIO(HANDSHAKE + "\n"), stdout=out)
    assert code == 0
    assert out.getvalue() == "READY 10\n"


def test_malformed_lines_get_error_replies() -> None:
    config = AdapterConfig(model_source="builtin:linear", dataset_source="synthetic")
    script = "\n".join([
        HANDSHAKE,
        "FROBNICATE now",
        "SAMPLE missing-fields 10",
        "SAMPLE p0 0 0 0.5",
        "SAMPLE p0 -3 0 0.5",
        "SAMPLE p0 10 0 -0.5",
        "BYE",
    ]) + "\n"
    out = io.StringIO()
    assert serve(config, stdin=io.StringIO(script), stdout=out) == 0
    lines = out.getvalue().splitlines()
    assert lines[0] == "READY 10"
    assert all(line.startswith("ERROR ") for line in lines[1:])
    assert len(lines) == 6


def test_config_validation() -> None:
    with pytest.raises(ValueError):
        AdapterConfig(model_source="builtin:linear", dataset_source="synthetic", num_classes=1)
    with pytest.raises(ValueError):
        AdapterConfig(model_source="builtin:linear", dataset_source="synthetic", batch_size=0)
    with pytest.raises(ValueError):
        AdapterConfig(model_source="builtin:linear", dataset_source="synthetic", device="tpu")


def test_sigma_zero_votes_are_unanimous() -> None:
    # no noise: every draw sees the same input, so one class gets all votes
    config = AdapterConfig(model_source="builtin:linear", dataset_source="synthetic")
    script = f"{HANDSHAKE}\nSAMPLE p7 64 0 0.0\nBYE\n"
    out = io.StringIO()
    assert serve(config, stdin=io.StringIO(script), stdout=out) == 0
    counts = parse_counts(out.getvalue().splitlines()[1], "p7")
    assert list(counts.values()) == [64]
