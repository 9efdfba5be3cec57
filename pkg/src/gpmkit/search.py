"""Batch comparison of profile stores: one-to-many and many-to-many scans.

The engine resolves every candidate once, stacks per-locus GPM cells into
dense arrays, and reduces each hypothesis to a per-locus affine kernel of
the candidate matrix, so a scan is a handful of vectorized passes instead
of per-candidate Python. Results are byte-identical for any worker count:
candidates are partitioned into fixed-size chunks, every per-candidate
value is computed row-independently, and chunks write disjoint slices of
preallocated arrays.

Per-candidate failures (an undefined ratio from a zero-background cell, an
unresolvable profile) are downgraded to reported warnings and never abort
a scan. Ranking is by best-hypothesis log10 ratio descending with
candidate id as the tiebreaker.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .core import GPM, AlleleVector
from .errors import DataValidationError, GpmError, UndefinedLikelihoodError
from .likelihood import (
    LocusLR,
    MultiLocusLR,
    _conditional_entries,
    _theta_value,
    lr_general,
)
from .relatives import MutationModel, RelationshipKind, RelationshipSpec
from .store import Profile, ProfileStore, resolve_profile

#: Candidates per work unit. Fixed so that chunk boundaries, and therefore
#: outputs, do not depend on the worker count.
CHUNK_SIZE = 1024


@dataclass(frozen=True)
class SearchQuery:
    """A one-to-many query: profile, hypotheses and reporting limits."""

    profile: Profile | str
    hypotheses: tuple[RelationshipSpec, ...]
    theta: float = 0.0
    min_lr: float = 0.0
    top_k: int = 10
    mutation: MutationModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if not self.hypotheses:
            raise DataValidationError("a query needs at least one hypothesis")
        labels = [spec.label for spec in self.hypotheses]
        if len(set(labels)) != len(labels):
            raise DataValidationError(f"duplicate hypotheses in query: {labels}")
        _theta_value(self.theta)
        if self.top_k < 1:
            raise DataValidationError(f"top_k must be >= 1, got {self.top_k!r}")
        if not self.min_lr >= 0.0:
            raise DataValidationError(f"min_lr must be >= 0, got {self.min_lr!r}")


@dataclass(frozen=True)
class SearchResult:
    """One candidate's ratios under every hypothesis.

    ``per_hypothesis`` maps hypothesis label to a MultiLocusLR, or None
    when that hypothesis was undefined for this candidate.
    """

    candidate_id: str
    per_hypothesis: Mapping[str, MultiLocusLR | None]
    best_hypothesis: str
    best_lr: float
    best_log10: float
    shared_loci: int

    def __post_init__(self):
        object.__setattr__(self, "per_hypothesis", dict(self.per_hypothesis))


@dataclass(frozen=True)
class SearchReport:
    """Ranked results plus the candidates that could not be compared."""

    results: tuple[SearchResult, ...]
    skipped: tuple[str, ...]
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class CrossPair:
    """One qualifying pair from a many-to-many comparison."""

    query_id: str
    result: SearchResult


class ResolvedStore:
    """A store resolved against a frequency set, with per-locus stacks.

    Candidates are held in sorted-id order. Profiles that fail to resolve
    are excluded and reported in ``warnings``. Stacks are built lazily and
    cached, so repeated searches (and every query of a many-to-many scan)
    reuse them.
    """

    def __init__(self, store: ProfileStore, freqs: Mapping[str, AlleleVector]):
        self.freqs = freqs
        self.ids: list[str] = []
        self.gpms: dict[str, dict[str, GPM]] = {}
        self.warnings: list[str] = []
        self._stacks: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for cid in sorted(store.ids()):
            try:
                self.gpms[cid] = resolve_profile(store.get(cid), freqs)
            except GpmError as exc:
                self.warnings.append(f"candidate '{cid}': excluded, does not resolve: {exc}")
                continue
            self.ids.append(cid)

    def stack(self, locus_name: str) -> tuple[np.ndarray, np.ndarray]:
        """(sorted candidate positions, row-per-candidate flattened cells)."""
        cached = self._stacks
        if locus_name not in cached:
            positions = []
            rows = []
            for pos, cid in enumerate(self.ids):
                gpm = self.gpms[cid].get(locus_name)
                if gpm is not None:
                    positions.append(pos)
                    rows.append(gpm.entries.ravel())
            if rows:
                flat = np.vstack(rows)
            else:
                k = self.freqs[locus_name].locus.k
                flat = np.empty((0, k * k))
            cached[locus_name] = (np.asarray(positions, dtype=np.intp), flat)
        return cached[locus_name]


class _LocusPlan:
    """Per-locus kernels for one query: numerator coefficients per
    hypothesis plus the shared coancestry denominator coefficients."""

    def __init__(
        self,
        name: str,
        G1: GPM,
        b: AlleleVector,
        specs: Sequence[RelationshipSpec],
        theta: float,
    ):
        self.name = name
        self.b = b
        self.G1 = G1
        self.specs = list(specs)
        self.fast = bool(np.all(b.probs > 0.0))
        if not self.fast:
            return
        bp = b.probs
        B = np.outer(bp, bp)
        W = np.where(G1.entries > 0.0, G1.entries / B, 0.0)
        v = W @ bp  # equals W^T b because W is symmetric
        self.kernels: list[tuple[np.ndarray, float]] = []
        k = b.locus.k
        for spec in specs:
            if spec.kind is RelationshipKind.SAME:
                K = W.copy()
                c = 0.0
            elif spec.kind is RelationshipKind.DEGREE:
                w = v.copy()
                if spec.mutation is not None:
                    for _ in range(spec.degree):
                        w = spec.mutation.entries @ w
                scale = float(2**spec.degree)
                K = np.broadcast_to((2.0 * w / scale)[:, None], (k, k)).copy()
                c = (scale - 2.0) * float(bp @ v) / scale
            else:  # sibling
                K = (W + 2.0 * v[:, None]) / 4.0
                c = float(bp @ v) / 4.0
            self.kernels.append((np.ascontiguousarray(K.ravel()), c))
        if theta > 0.0:
            T = np.zeros((k, k))
            for i in range(k):
                for j in range(k):
                    g1 = G1.entries[i, j]
                    if g1 == 0.0:
                        continue
                    counts = np.zeros(k)
                    counts[i] += 1.0
                    counts[j] += 1.0
                    T += g1 * _conditional_entries(counts, bp, theta)
            self.t_flat = np.ascontiguousarray((T / B).ravel())
        else:
            self.t_flat = None


class _Scan:
    """All per-candidate numbers for one query over one resolved store."""

    def __init__(self, rs: ResolvedStore, plans: list[_LocusPlan], labels: list[str], theta: float):
        self.rs = rs
        self.plans = plans
        self.labels = labels
        self.theta = theta
        n = len(rs.ids)
        h = len(labels)
        self.log10_total = np.zeros((n, h))
        self.undefined = np.zeros((n, h), dtype=bool)
        self.shared = np.zeros(n, dtype=np.int64)
        self.per_locus: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
        for plan in plans:
            positions, _ = rs.stack(plan.name)
            m = len(positions)
            self.per_locus[plan.name] = (
                positions,
                np.full((m, h), np.nan),  # numerators
                np.full(m, np.nan),  # denominators
                np.full((m, h), np.nan),  # ratios
            )

    def run(self, workers: int) -> list[str]:
        n = len(self.rs.ids)
        chunks = [(lo, min(lo + CHUNK_SIZE, n)) for lo in range(0, n, CHUNK_SIZE)]
        if workers <= 1 or len(chunks) <= 1:
            warning_lists = [self._chunk(lo, hi) for lo, hi in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                warning_lists = list(pool.map(lambda c: self._chunk(*c), chunks))
        return [w for chunk_warnings in warning_lists for w in chunk_warnings]

    def _chunk(self, lo: int, hi: int) -> list[str]:
        warnings: list[str] = []
        for plan in self.plans:
            positions, num_out, den_out, lr_out = self.per_locus[plan.name]
            row_lo, row_hi = np.searchsorted(positions, [lo, hi])
            if row_lo == row_hi:
                continue
            pos = positions[row_lo:row_hi]
            self.shared[pos] += 1
            if plan.fast:
                _, flat = self.rs.stack(plan.name)
                flat_sl = flat[row_lo:row_hi]
                if plan.t_flat is None:
                    den = np.ones(row_hi - row_lo)
                else:
                    den = (flat_sl * plan.t_flat).sum(axis=1)
                den_out[row_lo:row_hi] = den
                for h, (k_flat, c) in enumerate(plan.kernels):
                    num = (flat_sl * k_flat).sum(axis=1) + c
                    lr = num / den
                    num_out[row_lo:row_hi, h] = num
                    lr_out[row_lo:row_hi, h] = lr
                    with np.errstate(divide="ignore"):
                        self.log10_total[pos, h] += np.log10(lr)
            else:
                warnings.extend(self._slow_rows(plan, row_lo, row_hi, pos))
        return warnings

    def _slow_rows(self, plan: _LocusPlan, row_lo: int, row_hi: int, pos: np.ndarray) -> list[str]:
        # Loci whose background has zero-frequency alleles: per-candidate
        # scalar evaluation so undefined cells raise exactly as the
        # single-pair API does.
        warnings = []
        positions, num_out, den_out, lr_out = self.per_locus[plan.name]
        for row, global_idx in zip(range(row_lo, row_hi), pos):
            cid = self.rs.ids[global_idx]
            G2 = self.rs.gpms[cid][plan.name]
            den_done = False
            for h, spec in enumerate(plan.specs):
                try:
                    result = lr_general(plan.G1, G2, spec, plan.b, self.theta)
                except UndefinedLikelihoodError as exc:
                    self.undefined[global_idx, h] = True
                    warnings.append(
                        f"candidate '{cid}': hypothesis '{self.labels[h]}': {exc}"
                    )
                    continue
                if not den_done:
                    den_out[row] = result.denominator
                    den_done = True
                num_out[row, h] = result.numerator
                lr_out[row, h] = result.lr
                self.log10_total[global_idx, h] += (
                    math.log10(result.lr) if result.lr > 0.0 else float("-inf")
                )
        return warnings


def _resolve_query_profile(
    query: SearchQuery, rs: ResolvedStore, freqs: Mapping[str, AlleleVector]
) -> tuple[str, dict[str, GPM]]:
    if isinstance(query.profile, str):
        if query.profile not in rs.gpms:
            raise DataValidationError(f"query id '{query.profile}' is not in the store")
        return query.profile, rs.gpms[query.profile]
    return query.profile.id, resolve_profile(query.profile, freqs)


def _effective_specs(
    hypotheses: Sequence[RelationshipSpec],
    mutation: MutationModel | None,
    b: AlleleVector,
) -> list[RelationshipSpec]:
    out = []
    for spec in hypotheses:
        if mutation is not None and spec.kind is RelationshipKind.DEGREE:
            spec = spec.with_mutation(mutation.matrix_for(b.locus))
        out.append(spec)
    return out


def _run_scan(
    query: SearchQuery,
    query_gpms: Mapping[str, GPM],
    rs: ResolvedStore,
    freqs: Mapping[str, AlleleVector],
    workers: int,
) -> tuple[_Scan, list[str]]:
    theta = _theta_value(query.theta)
    labels = [spec.label for spec in query.hypotheses]
    plans = []
    for name in freqs:
        if name not in query_gpms:
            continue
        b = freqs[name]
        specs = _effective_specs(query.hypotheses, query.mutation, b)
        plans.append(_LocusPlan(name, query_gpms[name], b, specs, theta))
    scan = _Scan(rs, plans, labels, theta)
    warnings = list(rs.warnings) + scan.run(workers)
    return scan, warnings


def _assemble_result(
    scan: _Scan,
    query_gpms: Mapping[str, GPM],
    global_idx: int,
) -> SearchResult:
    rs = scan.rs
    cid = rs.ids[global_idx]
    cand_loci = set(rs.gpms[cid])
    used = []
    for plan in scan.plans:
        if plan.name in cand_loci:
            used.append(plan.name)
    skipped = tuple(sorted((set(query_gpms) | cand_loci) - set(used)))
    per_hypothesis: dict[str, MultiLocusLR | None] = {}
    best_label = None
    best_log10 = float("-inf")
    for h, label in enumerate(scan.labels):
        if scan.undefined[global_idx, h]:
            per_hypothesis[label] = None
            continue
        locus_lrs = []
        for name in used:
            positions, num_out, den_out, lr_out = scan.per_locus[name]
            row = int(np.searchsorted(positions, global_idx))
            locus_lrs.append(
                LocusLR(name, float(lr_out[row, h]), float(num_out[row, h]), float(den_out[row]))
            )
        log10_total = float(scan.log10_total[global_idx, h])
        per_hypothesis[label] = MultiLocusLR(
            per_locus=tuple(locus_lrs),
            overall=10.0**log10_total,
            log10_overall=log10_total,
            skipped=skipped,
        )
        if best_label is None or log10_total > best_log10:
            best_label = label
            best_log10 = log10_total
    assert best_label is not None
    return SearchResult(
        candidate_id=cid,
        per_hypothesis=per_hypothesis,
        best_hypothesis=best_label,
        best_lr=10.0**best_log10,
        best_log10=best_log10,
        shared_loci=len(used),
    )


def _eligible_candidates(scan: _Scan, min_lr: float) -> tuple[list[tuple[float, str, int]], list[str]]:
    """(best_log10, id, index) for rankable candidates, plus zero-shared ids."""
    rankable = []
    no_shared = []
    for idx, cid in enumerate(scan.rs.ids):
        if scan.shared[idx] == 0:
            no_shared.append(cid)
            continue
        defined = ~scan.undefined[idx]
        if not defined.any():
            continue
        best_log10 = float(scan.log10_total[idx][defined].max())
        if math.isinf(min_lr) and min_lr > 0:
            continue
        if 10.0**best_log10 < min_lr:
            continue
        rankable.append((best_log10, cid, idx))
    return rankable, no_shared


def search(
    query: SearchQuery,
    store: ProfileStore | ResolvedStore,
    freqs: Mapping[str, AlleleVector],
    *,
    workers: int = 1,
) -> SearchReport:
    """Compare a query against every candidate and rank the best matches.

    Candidates sharing no locus with the query are listed in ``skipped``;
    per-candidate failures become warnings. The output is deterministic
    and identical for every worker count.
    """
    rs = store if isinstance(store, ResolvedStore) else ResolvedStore(store, freqs)
    _, query_gpms = _resolve_query_profile(query, rs, freqs)
    scan, warnings = _run_scan(query, query_gpms, rs, freqs, workers)
    rankable, no_shared = _eligible_candidates(scan, query.min_lr)
    rankable.sort(key=lambda item: (-item[0], item[1]))
    results = tuple(
        _assemble_result(scan, query_gpms, idx) for _, _, idx in rankable[: query.top_k]
    )
    return SearchReport(results=results, skipped=tuple(no_shared), warnings=tuple(warnings))


def cross_search(
    store_a: ProfileStore | ResolvedStore,
    store_b: ProfileStore | ResolvedStore,
    hypotheses: Sequence[RelationshipSpec],
    freqs: Mapping[str, AlleleVector],
    *,
    theta: float = 0.0,
    min_lr: float = 0.0,
    mutation: MutationModel | None = None,
    workers: int = 1,
) -> Iterator[CrossPair]:
    """Stream every pair (a, b) whose best-hypothesis ratio clears min_lr.

    Pairs are emitted ordered by a's id then b's id. The right-hand store's
    per-locus stacks are built once and reused for every left-hand profile.
    """
    rs_a = store_a if isinstance(store_a, ResolvedStore) else ResolvedStore(store_a, freqs)
    rs_b = store_b if isinstance(store_b, ResolvedStore) else ResolvedStore(store_b, freqs)
    hypotheses = tuple(hypotheses)
    for a_id in rs_a.ids:
        query = SearchQuery(
            profile=a_id,
            hypotheses=hypotheses,
            theta=theta,
            min_lr=min_lr,
            top_k=max(1, len(rs_b.ids)),
            mutation=mutation,
        )
        query_gpms = rs_a.gpms[a_id]
        scan, _ = _run_scan(query, query_gpms, rs_b, freqs, workers)
        rankable, _ = _eligible_candidates(scan, min_lr)
        for _, _, idx in sorted(rankable, key=lambda item: item[1]):
            yield CrossPair(a_id, _assemble_result(scan, query_gpms, idx))
