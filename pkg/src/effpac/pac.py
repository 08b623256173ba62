"""PAC experiments on Cantor space.

Distributions, labeled samples, a first-consistent-hypothesis learner, exact
and Monte Carlo error masses, repeated (eps, delta) trials, and the
epsilon-transversal predicates used in the finite-VC => learnable argument.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cantor import EventuallyPeriodic, PointGen, format_rational, parse_point, parse_rational, stream_key
from .errors import DomainError, NoConsistentHypothesis, SchemaError, UndecidedMembership
from .pi01 import IN, OUT, UNRESOLVED, ConceptClassEnum, MembershipOracle, decide_point

DEFAULT_BUDGET = 32
# m = ceil((c1/eps) * (d * ln(c2/eps) + ln(c3/delta)))
BEHW_CONSTANTS = (4, 12, 2)


def _q(x) -> Fraction:
    return parse_rational(x) if isinstance(x, str) else Fraction(x)


@dataclass(frozen=True)
class PACParams:
    eps: Fraction
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps", _q(self.eps))
        object.__setattr__(self, "delta", _q(self.delta))
        for name in ("eps", "delta"):
            v = getattr(self, name)
            if not 0 < v < Fraction(1, 2):
                raise DomainError(f"{name} must lie in (0, 1/2), got {v}")


class FiniteSupport:
    """Distribution with finitely many atoms and exact rational weights."""

    kind = "finite"

    def __init__(self, atoms: Sequence[PointGen], weights: Sequence | None = None, budget: int = DEFAULT_BUDGET):
        if not atoms:
            raise DomainError("a finite-support distribution needs at least one atom")
        self.atoms = list(atoms)
        if weights is None:
            weights = [Fraction(1, len(atoms))] * len(atoms)
        self.weights = [_q(w) for w in weights]
        if len(self.weights) != len(self.atoms):
            raise DomainError("atoms and weights differ in length")
        if any(w < 0 for w in self.weights) or sum(self.weights) != 1:
            raise DomainError("weights must be nonnegative and sum to exactly 1")
        keys = [stream_key(a) for a in self.atoms]
        if len(set(keys)) != len(keys):
            raise DomainError("atoms must be pairwise distinct points")
        self.budget = budget
        self._cdf = np.cumsum([float(w) for w in self.weights])
        self._cdf[-1] = 1.0

    def sample(self, rng: np.random.Generator, m: int) -> list[PointGen]:
        idx = np.searchsorted(self._cdf, rng.random(m), side="right")
        return [self.atoms[min(int(i), len(self.atoms) - 1)] for i in idx]

    def mass(self, oracle: MembershipOracle, budget: int | None = None) -> Fraction:
        """Exact probability of the concept, from atom memberships."""
        budget = budget or self.budget
        total = Fraction(0)
        for a, w in zip(self.atoms, self.weights):
            if w == 0:
                continue
            if _label(oracle, a, budget, "?"):
                total += w
        return total

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "atoms": [a.describe() for a in self.atoms],
            "weights": [format_rational(w) for w in self.weights],
            "budget": self.budget,
        }


class ProductBernoulli:
    """i.i.d. Bernoulli(p) bits; points are sampled to ``precision`` bits.

    A sample is represented by its first ``precision`` bits followed by zeros.
    Labels are read off that prefix only, so a label that resolves is the
    true label of the underlying random point.
    """

    kind = "bernoulli"

    def __init__(self, p=Fraction(1, 2), precision: int = 24):
        self.p = _q(p)
        if not 0 <= self.p <= 1:
            raise DomainError("p must lie in [0, 1]")
        if precision < 1:
            raise DomainError("precision must be at least 1")
        self.precision = precision
        self.budget = precision

    def sample(self, rng, m):
        bits = rng.random((m, self.precision)) < float(self.p)
        return [EventuallyPeriodic("".join("1" if b else "0" for b in row), "0") for row in bits]

    def to_json(self):
        return {"kind": self.kind, "p": format_rational(self.p), "precision": self.precision}


def distribution_from_json(data: dict):
    try:
        kind = data["kind"]
        if kind == "finite":
            return FiniteSupport(
                [parse_point(a) for a in data["atoms"]],
                data.get("weights"),
                int(data.get("budget", DEFAULT_BUDGET)),
            )
        if kind == "bernoulli":
            return ProductBernoulli(data.get("p", "1/2"), int(data.get("precision", 24)))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad distribution description: {exc}") from exc
    raise SchemaError(f"unknown distribution kind {data.get('kind')!r}")


def _label(oracle, p, budget, concept) -> int:
    verdict = decide_point(oracle, p, budget)
    if verdict == IN:
        return 1
    if verdict == OUT:
        return 0
    raise UndecidedMembership(p.describe(), concept, budget)


@dataclass
class LabeledSample:
    pairs: list
    target: object = None
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "seed": self.seed,
            "pairs": [[p.describe(), b] for p, b in self.pairs],
        }


def draw_sample(
    D, m: int, oracle: MembershipOracle, seed: int, budget: int | None = None, target=None
) -> LabeledSample:
    """m i.i.d. draws from D, each labeled by membership in the target concept."""
    if m < 1:
        raise DomainError("sample size m must be at least 1")
    budget = budget or D.budget
    rng = np.random.default_rng(seed)
    points = D.sample(rng, m)
    labels = {}
    pairs = []
    for p in points:
        key = p.describe()
        if key not in labels:
            labels[key] = _label(oracle, p, budget, target)
        pairs.append((p, labels[key]))
    return LabeledSample(pairs, target, seed)


def behw_sample_size(eps, delta, d: int, constants=BEHW_CONSTANTS) -> int:
    """Sample size sufficient for a consistent learner over a class of VC dimension d."""
    eps, delta = float(_q(eps)), float(_q(delta))
    if d < 0:
        raise DomainError("VC dimension must be nonnegative")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise DomainError("eps and delta must lie in (0, 1)")
    c1, c2, c3 = constants
    return math.ceil((c1 / eps) * (d * math.log(c2 / eps) + math.log(c3 / delta)))


class MembershipCache:
    """Memoized decide_point verdicts keyed by (concept index, point description)."""

    def __init__(self, C: ConceptClassEnum, budget: int):
        self.C = C
        self.budget = budget
        self._table: dict[tuple[int, str], str] = {}

    def status(self, k: int, p: PointGen) -> str:
        key = (k, p.describe())
        v = self._table.get(key)
        if v is None:
            v = self._table[key] = decide_point(self.C.oracle(k), p, self.budget)
        return v


def consistent_learner(
    sample: LabeledSample,
    C: ConceptClassEnum,
    prefix_len: int,
    budget: int,
    cache: MembershipCache | None = None,
) -> int:
    """Least k < prefix_len whose concept agrees with every labeled pair."""
    cache = cache or MembershipCache(C, budget)
    wanted: dict[str, tuple[PointGen, int]] = {}
    for p, b in sample.pairs:
        key = p.describe()
        if key in wanted and wanted[key][1] != b:
            raise NoConsistentHypothesis(f"point {key} carries both labels")
        wanted[key] = (p, b)
    expect = {1: IN, 0: OUT}
    for k in range(prefix_len):
        if all(cache.status(k, p) == expect[b] for p, b in wanted.values()):
            return k
    raise NoConsistentHypothesis(f"no concept among the first {prefix_len} fits the sample")


@dataclass
class ErrorMass:
    value: Fraction | float
    exact: bool
    samples: int = 0
    unresolved: int = 0

    def __float__(self):
        return float(self.value)

    def to_json(self):
        value = format_rational(self.value) if self.exact else self.value
        return {"value": value, "exact": self.exact, "samples": self.samples, "unresolved": self.unresolved}


def error_mass(D, h: MembershipOracle, c: MembershipOracle, mc_samples: int = 10_000, seed: int = 0, budget=None) -> ErrorMass:
    """Probability under D of the symmetric difference of concepts h and c."""
    budget = budget or D.budget
    if isinstance(D, FiniteSupport):
        total = Fraction(0)
        for a, w in zip(D.atoms, D.weights):
            if w and _label(h, a, budget, "h") != _label(c, a, budget, "c"):
                total += w
        return ErrorMass(total, True)
    rng = np.random.default_rng(seed)
    differ = unresolved = 0
    for p in D.sample(rng, mc_samples):
        vh, vc = decide_point(h, p, budget), decide_point(c, p, budget)
        if UNRESOLVED in (vh, vc):
            unresolved += 1
        elif vh != vc:
            differ += 1
    n = mc_samples - unresolved
    return ErrorMass(differ / n if n else float("nan"), False, mc_samples, unresolved)


def is_nontrivial(C: ConceptClassEnum, prefix_len: int, D: FiniteSupport, budget: int | None = None) -> bool:
    """At least two distinct traces on the support of D."""
    budget = budget or D.budget
    traces = set()
    for k in range(prefix_len):
        o = C.oracle(k)
        traces.add(tuple(_label(o, a, budget, k) for a, w in zip(D.atoms, D.weights) if w))
        if len(traces) > 1:
            return True
    return False


def trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


@dataclass
class TrialRecord:
    trial: int
    seed: int
    hypothesis: int | None
    error: ErrorMass | None
    success: bool
    aborted: str | None = None

    def to_json(self):
        return {
            "trial": self.trial,
            "seed": self.seed,
            "hypothesis": self.hypothesis,
            "error": None if self.error is None else self.error.to_json()["value"],
            "success": self.success,
            "aborted": self.aborted,
        }


@dataclass
class PACReport:
    success_rate: float
    successes: int
    completed: int
    aborted: int
    m_used: int
    d: int
    params: PACParams
    trials: list = field(default_factory=list)

    def to_json(self):
        return {
            "success_rate": self.success_rate,
            "successes": self.successes,
            "completed": self.completed,
            "aborted": self.aborted,
            "m_used": self.m_used,
            "d": self.d,
            "eps": format_rational(self.params.eps),
            "delta": format_rational(self.params.delta),
            "trials": [t.to_json() for t in self.trials],
        }


def _run_trials(job):
    C, prefix_len, target, D, params, m, budget, mc_samples, chunk = job
    cache = MembershipCache(C, budget)
    target_oracle = C.oracle(target)
    out = []
    for trial, seed in chunk:
        try:
            sample = draw_sample(D, m, target_oracle, seed, budget, target)
            h = consistent_learner(sample, C, prefix_len, budget, cache)
            err = error_mass(D, C.oracle(h), target_oracle, mc_samples, seed + 1, budget)
        except UndecidedMembership as exc:
            out.append(TrialRecord(trial, seed, None, None, False, str(exc)))
            continue
        out.append(TrialRecord(trial, seed, h, err, float(err.value) <= params.eps))
    return out


def pac_experiment(
    C: ConceptClassEnum,
    prefix_len: int,
    target: int,
    D,
    params: PACParams,
    trials: int,
    seed: int,
    d: int,
    budget: int | None = None,
    workers: int = 1,
    mc_samples: int = 10_000,
    constants=BEHW_CONSTANTS,
) -> PACReport:
    """Repeat the (eps, delta) game ``trials`` times and count the successes.

    Each trial has its own seed spawned from ``seed``, so the report does not
    depend on how trials are split among workers.
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if not 0 <= target < prefix_len:
        raise DomainError(f"target {target} is outside the prefix of length {prefix_len}")
    budget = budget or D.budget
    m = behw_sample_size(params.eps, params.delta, d, constants)
    seeds = list(enumerate(trial_seeds(seed, trials)))
    workers = max(1, min(workers, trials))
    chunks = [seeds[i::workers] for i in range(workers)]
    jobs = [(C, prefix_len, target, D, params, m, budget, mc_samples, ch) for ch in chunks]
    if workers == 1:
        records = _run_trials(jobs[0])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for part in pool.map(_run_trials, jobs) for r in part]
    records.sort(key=lambda r: r.trial)
    completed = [r for r in records if r.aborted is None]
    successes = sum(r.success for r in completed)
    rate = successes / len(completed) if completed else 0.0
    return PACReport(rate, successes, len(completed), len(records) - len(completed), m, d, params, records)


# --------------------------------------------------------------------------
# epsilon-transversals


def _heavy(R: Sequence[MembershipOracle], D: FiniteSupport, eps: Fraction, budget: int) -> list[int]:
    return [i for i, c in enumerate(R) if D.mass(c, budget) > eps]


def _hits(c: MembershipOracle, points: Sequence[PointGen], budget: int, idx) -> int:
    return sum(_label(c, p, budget, idx) for p in points)


def transversal_check(
    N: Sequence[PointGen], R: Sequence[MembershipOracle], D: FiniteSupport, eps, budget: int | None = None
) -> bool:
    """Does N meet every concept of R whose D-mass exceeds eps?"""
    eps = _q(eps)
    budget = budget or D.budget
    return all(_hits(R[i], N, budget, i) > 0 for i in _heavy(R, D, eps, budget))


def distinct_points(xs: Sequence[PointGen]) -> list[PointGen]:
    seen = {}
    for x in xs:
        seen.setdefault(stream_key(x), x)
    return list(seen.values())


def q_membership(xs: Sequence[PointGen], R, D: FiniteSupport, eps, budget: int | None = None) -> bool:
    """Is the tuple in Q^m_eps(R): its distinct entries fail to be an eps-transversal?"""
    return not transversal_check(distinct_points(xs), R, D, eps, budget)


def j_membership(
    xs: Sequence[PointGen], ys: Sequence[PointGen], R, D: FiniteSupport, eps, budget: int | None = None
) -> bool:
    """Is xs+ys in J^{2m}_eps(R)?

    Some heavy concept is missed by xs entirely while at least eps*m/2 of
    the positions of ys fall inside it.
    """
    if len(xs) != len(ys) or not xs:
        raise DomainError("xs and ys must be nonempty tuples of equal length")
    eps = _q(eps)
    budget = budget or D.budget
    threshold = eps * len(ys) / 2
    for i in _heavy(R, D, eps, budget):
        if _hits(R[i], xs, budget, i) == 0 and _hits(R[i], ys, budget, i) >= threshold:
            return True
    return False
