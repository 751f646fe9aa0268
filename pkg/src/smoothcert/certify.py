"""Point-wise certification: votes in, sound robustness certificates out.

``certify`` runs the single-phase procedure: draw n votes, take the majority
class, lower-bound its probability at confidence alpha, and certify the
radius sigma * Phi^-1(bound) when the bound clears one half, abstaining
otherwise.  Because the same votes pick the majority and feed the one-sided
bound, the certificate stays sound: the chance of certifying any wrong-class
or over-long radius is at most alpha per point.

A two-phase variant (separate selection draws, then fresh estimation draws)
is available behind a flag for compatibility with pipelines that want an
unbiased class pick; it spends extra samples for no radius gain, so it is
off by default.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .bounds import ConfidenceSpec, ProbEstimate, clt_lower_bound, cp_lower_bound
from .oracles import OracleSpec, VoteTally, draw_votes
from .radius import P_CAP, SmoothingConfig, certified_radius
from .rng import mix64

__all__ = [
    "CLOPPER_PEARSON",
    "CLT",
    "Certified",
    "Abstain",
    "CertificationOutcome",
    "BatchError",
    "certify",
    "certify_batch",
    "outcome_to_dict",
    "outcome_from_dict",
    "write_outcomes",
    "read_outcomes",
]

CLOPPER_PEARSON = "clopper_pearson"
CLT = "clt"
_BOUND_METHODS = (CLOPPER_PEARSON, CLT)

# salt separating two-phase selection draws from estimation draws
_SELECTION_SALT = 0x5E1EC7104B5EED00


@dataclass(frozen=True)
class Certified:
    """Decision: ``class_label`` is robust within ``radius`` of the input."""

    class_label: int
    radius: float

    def __post_init__(self) -> None:
        if self.radius < 0.0:
            raise ValueError(f"radius must be >= 0, got {self.radius!r}")


@dataclass(frozen=True)
class Abstain:
    """Decision: the vote margin was too thin to certify anything."""


@dataclass(frozen=True)
class CertificationOutcome:
    """Everything reported for one certified point.

    ``p_hat`` is the raw majority-class vote share, ``p_lower`` its one-sided
    lower confidence bound.  ``tie_broken`` records that the majority class
    was picked from a tied tally (smallest label wins); ``saturated`` that
    ``p_lower`` hit the 1 - 1e-9 cap and the radius is the capped value.
    """

    point_id: str
    decision: Certified | Abstain
    p_hat: float
    p_lower: float
    n: int
    alpha: float
    sigma: float
    bound_method: str
    tie_broken: bool = False
    saturated: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.decision, Certified) and self.p_lower < 0.5:
            raise ValueError("certified outcomes require p_lower >= 0.5")
        if isinstance(self.decision, Abstain) and self.p_lower >= 0.5:
            raise ValueError("abstaining with p_lower >= 0.5 makes no sense")


class BatchError(Exception):
    """Wraps the first per-point failure inside ``certify_batch``."""

    def __init__(self, index: int, point_id: str, cause: Exception) -> None:
        super().__init__(f"point {index} ({point_id!r}): {cause}")
        self.index = index
        self.point_id = point_id
        self.cause = cause


def _decide(
    tally: VoteTally,
    label: int,
    tie_broken: bool,
    cfg: SmoothingConfig,
    bound_method: str,
) -> CertificationOutcome:
    est = ProbEstimate(successes=tally.count_for(label), n=tally.n)
    if bound_method == CLOPPER_PEARSON:
        p_lower = cp_lower_bound(est, cfg.conf)
    else:
        p_lower = clt_lower_bound(est, cfg.conf)
    saturated = p_lower > P_CAP
    if p_lower >= 0.5:
        decision: Certified | Abstain = Certified(
            class_label=label, radius=certified_radius(p_lower, cfg.sigma)
        )
    else:
        decision = Abstain()
    return CertificationOutcome(
        point_id=tally.point_id,
        decision=decision,
        p_hat=est.p_hat,
        p_lower=p_lower,
        n=tally.n,
        alpha=cfg.conf.alpha,
        sigma=cfg.sigma,
        bound_method=bound_method,
        tie_broken=tie_broken,
        saturated=saturated,
    )


def certify(
    oracle: OracleSpec,
    point_id: str,
    cfg: SmoothingConfig,
    bound_method: str = CLOPPER_PEARSON,
    seed: int = 0,
    two_phase: bool = False,
    n_selection: int = 100,
) -> CertificationOutcome:
    """Certify one point.

    Single-phase (default): one batch of cfg.n votes both picks the majority
    class and feeds the bound.  Two-phase: ``n_selection`` votes on an
    independent stream pick the class, then cfg.n fresh votes estimate its
    probability; the estimation tally decides exactly as before.
    """
    if bound_method not in _BOUND_METHODS:
        raise ValueError(f"unknown bound_method {bound_method!r}")
    if two_phase:
        if n_selection < 1:
            raise ValueError(f"n_selection must be >= 1, got {n_selection!r}")
        selection_seed = mix64(seed ^ _SELECTION_SALT)
        pilot = draw_votes(oracle, point_id, n_selection, selection_seed, cfg.sigma)
        label, tie_broken = pilot.top_class()
        tally = draw_votes(oracle, point_id, cfg.n, seed, cfg.sigma)
    else:
        tally = draw_votes(oracle, point_id, cfg.n, seed, cfg.sigma)
        label, tie_broken = tally.top_class()
    return _decide(tally, label, tie_broken, cfg, bound_method)


def certify_batch(
    oracle: OracleSpec,
    point_ids: Sequence[str],
    cfg: SmoothingConfig,
    bound_method: str = CLOPPER_PEARSON,
    seed: int = 0,
    parallelism: int = 1,
    two_phase: bool = False,
    n_selection: int = 100,
) -> list[CertificationOutcome]:
    """Certify points in input order, optionally across worker threads.

    Results are byte-identical for every ``parallelism`` because each point's
    randomness is keyed by its identity, never by schedule.  The first point
    that fails aborts the batch with a ``BatchError`` naming its index.
    """
    if len(point_ids) == 0:
        raise ValueError("certify_batch requires at least one point")
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism!r}")

    def one(item: tuple[int, str]) -> CertificationOutcome:
        index, pid = item
        try:
            return certify(
                oracle,
                pid,
                cfg,
                bound_method=bound_method,
                seed=seed,
                two_phase=two_phase,
                n_selection=n_selection,
            )
        except Exception as exc:
            raise BatchError(index, pid, exc) from exc

    items = list(enumerate(point_ids))
    if parallelism == 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, items))


def outcome_to_dict(outcome: CertificationOutcome) -> dict:
    """JSON-ready mapping; the inverse of ``outcome_from_dict``."""
    if isinstance(outcome.decision, Certified):
        decision = {
            "kind": "certified",
            "class_label": outcome.decision.class_label,
            "radius": outcome.decision.radius,
        }
    else:
        decision = {"kind": "abstain"}
    return {
        "point_id": outcome.point_id,
        "decision": decision,
        "p_hat": outcome.p_hat,
        "p_lower": outcome.p_lower,
        "n": outcome.n,
        "alpha": outcome.alpha,
        "sigma": outcome.sigma,
        "bound_method": outcome.bound_method,
        "tie_broken": outcome.tie_broken,
        "saturated": outcome.saturated,
    }


def outcome_from_dict(payload: dict) -> CertificationOutcome:
    raw = payload["decision"]
    decision: Certified | Abstain
    if raw["kind"] == "certified":
        decision = Certified(class_label=raw["class_label"], radius=raw["radius"])
    elif raw["kind"] == "abstain":
        decision = Abstain()
    else:
        raise ValueError(f"unknown decision kind {raw['kind']!r}")
    return CertificationOutcome(
        point_id=payload["point_id"],
        decision=decision,
        p_hat=payload["p_hat"],
        p_lower=payload["p_lower"],
        n=payload["n"],
        alpha=payload["alpha"],
        sigma=payload["sigma"],
        bound_method=payload["bound_method"],
        tie_broken=payload.get("tie_broken", False),
        saturated=payload.get("saturated", False),
    )


def write_outcomes(outcomes: Iterable[CertificationOutcome], fp: IO[str]) -> None:
    """Write outcomes as JSON lines (one object per line, LF endings)."""
    for outcome in outcomes:
        fp.write(json.dumps(outcome_to_dict(outcome), separators=(", ", ": ")))
        fp.write("\n")


def read_outcomes(fp: IO[str]) -> list[CertificationOutcome]:
    """Read a JSON-lines outcome report; blank lines are ignored."""
    outcomes = []
    for line in fp:
        line = line.strip()
        if line:
            outcomes.append(outcome_from_dict(json.loads(line)))
    return outcomes
