"""Vote sources for the certification engine.

Three interchangeable oracle kinds produce class-vote tallies for a point:

* ``SyntheticOracle`` simulates a base classifier with a known top-class
  probability, for calibration studies and tests.
* ``RecordedOracle`` replays tallies from a CSV file (columns
  ``point_id,class,count``), for offline reprocessing of cached votes.
* ``ExternalOracle`` drives a live model over a line-oriented subprocess
  protocol, for certifying a real network without this package importing it.

``draw_votes`` dispatches on the oracle kind and is the only entry point the
engine uses.
"""

from __future__ import annotations

import csv
import shlex
import subprocess
import threading
from dataclasses import dataclass, field

from .rng import CounterStream, binomial, derive_stream_key, split_uniform

__all__ = [
    "SINGLE_RIVAL",
    "UNIFORM_RIVALS",
    "PROTOCOL_NAME",
    "PROTOCOL_VERSION",
    "VoteTally",
    "OracleError",
    "RecordedVotesError",
    "ProtocolError",
    "SyntheticOracle",
    "RecordedOracle",
    "ExternalOracle",
    "draw_votes",
    "load_recorded_votes",
]

SINGLE_RIVAL = "single_rival"
UNIFORM_RIVALS = "uniform_rivals"

PROTOCOL_NAME = "smoothcert-oracle"
PROTOCOL_VERSION = 1

# stream domains under one point key
_DOMAIN_TOP = 1
_DOMAIN_RIVALS = 2


class OracleError(Exception):
    """Base class for vote-source failures."""


class RecordedVotesError(OracleError):
    """Malformed or inconsistent recorded-votes file."""


class ProtocolError(OracleError):
    """External oracle subprocess violated the wire protocol."""


@dataclass(frozen=True)
class VoteTally:
    """Class votes for one point: ``counts[label]`` draws landed on ``label``.

    Only classes with at least one vote appear; counts sum to ``n``.
    """

    point_id: str
    n: int
    counts: dict[int, int]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        total = 0
        for label, count in self.counts.items():
            if not isinstance(label, int) or isinstance(label, bool):
                raise ValueError(f"class labels must be integers, got {label!r}")
            if count <= 0:
                raise ValueError(f"counts must be positive, got {count!r} for class {label!r}")
            total += count
        if total != self.n:
            raise ValueError(f"counts sum to {total}, expected n={self.n}")

    def top_class(self) -> tuple[int, bool]:
        """Majority label and whether a tie was broken (smallest label wins)."""
        best = max(self.counts.values())
        winners = sorted(label for label, c in self.counts.items() if c == best)
        return winners[0], len(winners) > 1

    def count_for(self, label: int) -> int:
        return self.counts.get(label, 0)


@dataclass(frozen=True)
class SyntheticOracle:
    """Simulated base classifier whose top class (label 0) wins with prob ``p_a``.

    Remaining probability goes to label 1 under ``single_rival`` or is shared
    evenly by labels 1..num_classes-1 under ``uniform_rivals``.  Draws are a
    pure function of (seed, point_id, n): exact binomial sampling on a
    counter-based stream, so any schedule and any platform reproduce the same
    tally bit for bit.
    """

    p_a: float
    num_classes: int = 2
    rival_policy: str = SINGLE_RIVAL

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_a <= 1.0:
            raise ValueError(f"p_a must lie in [0, 1], got {self.p_a!r}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes!r}")
        if self.rival_policy not in (SINGLE_RIVAL, UNIFORM_RIVALS):
            raise ValueError(f"unknown rival_policy {self.rival_policy!r}")

    def draw(self, point_id: str, n: int, seed: int) -> VoteTally:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n!r}")
        key = derive_stream_key(seed, point_id)
        top = binomial(CounterStream(key, domain=_DOMAIN_TOP), n, self.p_a)
        counts: dict[int, int] = {}
        if top > 0:
            counts[0] = top
        rest = n - top
        if rest > 0:
            if self.rival_policy == SINGLE_RIVAL:
                counts[1] = rest
            else:
                shares = split_uniform(
                    CounterStream(key, domain=_DOMAIN_RIVALS), rest, self.num_classes - 1
                )
                for offset, share in enumerate(shares):
                    if share > 0:
                        counts[1 + offset] = share
        return VoteTally(point_id=point_id, n=n, counts=counts)


def load_recorded_votes(path: str) -> dict[str, VoteTally]:
    """Parse a recorded-votes CSV into per-point tallies, preserving file order.

    The header row ``point_id,class,count`` is required.  Rows belonging to
    one point must be contiguous; class labels must be integers, counts
    positive integers, and a class may appear at most once per point.
    """
    tallies: dict[str, VoteTally] = {}
    current_id: str | None = None
    current_counts: dict[int, int] = {}

    def flush() -> None:
        nonlocal current_counts
        if current_id is not None:
            tallies[current_id] = VoteTally(
                point_id=current_id, n=sum(current_counts.values()), counts=current_counts
            )
            current_counts = {}

    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise RecordedVotesError(f"cannot open recorded votes {path!r}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["point_id", "class", "count"]:
            raise RecordedVotesError(
                f"{path!r}: first row must be the header 'point_id,class,count', got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise RecordedVotesError(f"{path!r}:{lineno}: expected 3 columns, got {len(row)}")
            pid, cls_text, count_text = (cell.strip() for cell in row)
            if not pid:
                raise RecordedVotesError(f"{path!r}:{lineno}: empty point_id")
            try:
                label = int(cls_text)
            except ValueError:
                raise RecordedVotesError(
                    f"{path!r}:{lineno}: class labels must be integers, got {cls_text!r}"
                ) from None
            try:
                count = int(count_text)
            except ValueError:
                raise RecordedVotesError(
                    f"{path!r}:{lineno}: counts must be integers, got {count_text!r}"
                ) from None
            if count <= 0:
                raise RecordedVotesError(f"{path!r}:{lineno}: counts must be positive, got {count}")
            if pid != current_id:
                if pid in tallies:
                    raise RecordedVotesError(
                        f"{path!r}:{lineno}: rows for point {pid!r} are not contiguous"
                    )
                flush()
                current_id = pid
            if label in current_counts:
                raise RecordedVotesError(
                    f"{path!r}:{lineno}: duplicate class {label} for point {pid!r}"
                )
            current_counts[label] = count
        try:
            flush()
        except ValueError as exc:
            raise RecordedVotesError(f"{path!r}: {exc}") from exc
    if not tallies:
        raise RecordedVotesError(f"{path!r}: no vote rows found")
    return tallies


@dataclass
class RecordedOracle:
    """Replays tallies parsed from a recorded-votes CSV.

    Tallies are returned verbatim, so the sample count and the noise scale
    they were recorded under are whatever the file says; requests for unknown
    points raise ``RecordedVotesError``.
    """

    path: str
    _tallies: dict[str, VoteTally] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._tallies = load_recorded_votes(self.path)

    @property
    def point_ids(self) -> list[str]:
        return list(self._tallies)

    def draw(self, point_id: str) -> VoteTally:
        try:
            return self._tallies[point_id]
        except KeyError:
            raise RecordedVotesError(
                f"no recorded votes for point {point_id!r} in {self.path!r}"
            ) from None


class _ProtocolClient:
    """One subprocess speaking the line-oriented vote protocol, v1.

    Handshake: we send ``HELLO smoothcert-oracle 1``; the oracle answers
    ``READY <num_classes>``.  Each ``SAMPLE <point_id> <n> <seed> <sigma>``
    is answered by ``COUNTS <point_id> <k> <class>:<count> ...`` with counts
    summing to n, or ``ERROR <message>``.  ``BYE`` asks the oracle to exit 0.
    All traffic is UTF-8 with LF endings.
    """

    def __init__(self, command: list[str]) -> None:
        try:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot launch oracle command {command!r}: {exc}") from exc
        self._send(f"HELLO {PROTOCOL_NAME} {PROTOCOL_VERSION}")
        line = self._recv()
        parts = line.split()
        if len(parts) != 2 or parts[0] != "READY":
            raise ProtocolError(f"expected 'READY <num_classes>' after handshake, got {line!r}")
        try:
            self.num_classes = int(parts[1])
        except ValueError:
            raise ProtocolError(f"READY carried a non-integer class count: {line!r}") from None
        if self.num_classes < 2:
            raise ProtocolError(f"oracle reported num_classes={self.num_classes}, need >= 2")

    def _send(self, line: str) -> None:
        if self.proc.stdin is None:  # pragma: no cover - Popen contract
            raise ProtocolError("oracle stdin is closed")
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"oracle exited mid-conversation: {exc}") from exc

    def _recv(self) -> str:
        if self.proc.stdout is None:  # pragma: no cover - Popen contract
            raise ProtocolError("oracle stdout is closed")
        line = self.proc.stdout.readline()
        if line == "":
            raise ProtocolError("oracle closed its output stream unexpectedly")
        return line.rstrip("\n")

    def sample(self, point_id: str, n: int, seed: int, sigma: float) -> VoteTally:
        self._send(f"SAMPLE {point_id} {n} {seed} {sigma!r}")
        line = self._recv()
        parts = line.split()
        if parts and parts[0] == "ERROR":
            raise ProtocolError(f"oracle error for point {point_id!r}: {line[6:].strip()}")
        if len(parts) < 3 or parts[0] != "COUNTS":
            raise ProtocolError(f"expected COUNTS reply, got {line!r}")
        if parts[1] != point_id:
            raise ProtocolError(
                f"COUNTS reply names point {parts[1]!r}, expected {point_id!r}"
            )
        try:
            pair_count = int(parts[2])
        except ValueError:
            raise ProtocolError(f"non-integer pair count in {line!r}") from None
        pairs = parts[3:]
        if len(pairs) != pair_count:
            raise ProtocolError(
                f"COUNTS promised {pair_count} pairs but carried {len(pairs)}: {line!r}"
            )
        counts: dict[int, int] = {}
        for pair in pairs:
            label_text, _, count_text = pair.partition(":")
            try:
                label, count = int(label_text), int(count_text)
            except ValueError:
                raise ProtocolError(f"malformed class:count pair {pair!r} in {line!r}") from None
            if label in counts:
                raise ProtocolError(f"duplicate class {label} in {line!r}")
            if not 0 <= label < self.num_classes:
                raise ProtocolError(
                    f"class {label} outside [0, {self.num_classes}) in {line!r}"
                )
            if count <= 0:
                raise ProtocolError(f"non-positive count in {line!r}")
            counts[label] = count
        if sum(counts.values()) != n:
            raise ProtocolError(
                f"counts sum to {sum(counts.values())}, expected n={n}: {line!r}"
            )
        return VoteTally(point_id=point_id, n=n, counts=counts)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self._send("BYE")
            except ProtocolError:
                pass
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
                raise ProtocolError("oracle ignored BYE; killed")
        if self.proc.stdin is not None:
            self.proc.stdin.close()
        if self.proc.stdout is not None:
            self.proc.stdout.close()
        if self.proc.returncode != 0:
            raise ProtocolError(f"oracle exited with status {self.proc.returncode}")


@dataclass
class ExternalOracle:
    """Votes served by a live subprocess over the v1 wire protocol.

    ``command`` is the oracle launch command (string forms are shlex-split).
    Requests carry an explicit seed and noise scale so the remote side can be
    exactly reproducible too.  A pool of up to ``pool_size`` subprocesses
    serves concurrent batch requests; each subprocess handles one request at
    a time.  Use as a context manager or call ``close()`` to shut the pool
    down and verify clean oracle exits.
    """

    command: str | list[str]
    protocol_version: int = PROTOCOL_VERSION
    pool_size: int = 1

    def __post_init__(self) -> None:
        if self.protocol_version != PROTOCOL_VERSION:
            raise ProtocolError(
                f"unsupported protocol version {self.protocol_version!r}; "
                f"this build speaks {PROTOCOL_VERSION}"
            )
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size!r}")
        self._argv = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        if not self._argv:
            raise ValueError("oracle command is empty")
        self._idle: list[_ProtocolClient] = []
        self._cond = threading.Condition()
        self._spawned = 0
        self._closed = False

    def _acquire(self) -> _ProtocolClient:
        with self._cond:
            while True:
                if self._closed:
                    raise ProtocolError("oracle pool is closed")
                if self._idle:
                    return self._idle.pop()
                if self._spawned < self.pool_size:
                    self._spawned += 1
                    break
                self._cond.wait()
        try:
            return _ProtocolClient(self._argv)
        except ProtocolError:
            with self._cond:
                self._spawned -= 1
                self._cond.notify()
            raise

    def _release(self, client: _ProtocolClient) -> None:
        with self._cond:
            self._idle.append(client)
            self._cond.notify()

    def draw(self, point_id: str, n: int, seed: int, sigma: float) -> VoteTally:
        if any(ch.isspace() for ch in point_id) or not point_id:
            raise ProtocolError(f"point_id {point_id!r} cannot cross the wire")
        client = self._acquire()
        try:
            tally = client.sample(point_id, n, seed, sigma)
        except ProtocolError:
            # a protocol violation poisons the subprocess; drop it
            with self._cond:
                self._spawned -= 1
                self._cond.notify()
            try:
                client.proc.kill()
                client.proc.wait()
            except OSError:  # pragma: no cover - already gone
                pass
            raise
        self._release(client)
        return tally

    def close(self) -> None:
        with self._cond:
            clients = self._idle
            self._idle = []
            self._closed = True
            self._cond.notify_all()
        errors = []
        for client in clients:
            try:
                client.close()
            except ProtocolError as exc:
                errors.append(str(exc))
        if errors:
            raise ProtocolError("; ".join(errors))

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


OracleSpec = SyntheticOracle | RecordedOracle | ExternalOracle


def draw_votes(
    oracle: OracleSpec,
    point_id: str,
    n: int,
    seed: int,
    sigma: float | None = None,
) -> VoteTally:
    """Fetch a vote tally for one point from any oracle kind.

    ``sigma`` is forwarded to external oracles, which need it to scale their
    noise; omitting it there is a protocol error.  Synthetic draws do not
    depend on sigma (the vote law is fixed by p_a alone) and recorded tallies
    were taken under whatever scale the file's producer used.
    """
    if isinstance(oracle, SyntheticOracle):
        return oracle.draw(point_id, n, seed)
    if isinstance(oracle, RecordedOracle):
        return oracle.draw(point_id)
    if isinstance(oracle, ExternalOracle):
        if sigma is None:
            raise ProtocolError("external oracles require sigma for each request")
        return oracle.draw(point_id, n, seed, sigma)
    raise TypeError(f"unknown oracle type {type(oracle).__name__}")
