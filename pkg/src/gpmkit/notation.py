"""Shorthand designation notation and one/two-contributor GPM assembly.

A designation string describes one allele vector over a locus::

    designation := 'F' | item ('/' item)*
    item        := allele | allele '@' weight
    weight      := decimal | 'B'

A weight binds to every allele in the maximal run of items since the
previous weight, so "11/12/13@B" weights all three alleles and
"11@0.4/12@0.6" weights each separately. Numeric weights assign that
probability to each allele of their run. All '@B' alleles, plus any
trailing weightless run, share the residual mass 1 - sum(numeric weights)
in proportion to their background frequencies. 'F' is shorthand for the
whole alphabet at '@B', i.e. the background vector itself. A single bare
allele ("11") is that allele with certainty.

Designations with numeric weights only are accepted when their total lies
in [1 - 0.02, 1] (plus float tolerance) and rescaled to one, so
"11/12/13@0.33" means equal thirds; totals below the band are an error
because there is no background group to absorb the residual.

Two contributors are encoded as four allele vectors with per-vector tags
(major / minor / either). Tag patterns determine how vectors are paired
into contributor genotypes; when a vector could belong to either
contributor, all admissible pairings are averaged.
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .core import (
    GPM,
    GPM_SUM_TOL,
    AlleleVector,
    Locus,
    gpm_from_allele_vectors,
)
from .errors import DataValidationError, InputParseError, UnknownAlleleError

#: Numeric-only designations whose total is this far below 1 are still
#: accepted and rescaled ("0.33" style shorthand); beyond it they error.
DESIGNATION_RENORM_BAND = 0.02


def _split_items(text: str) -> list[tuple[str, int]]:
    """'/'-separated items with their 0-based character offsets."""
    items = []
    pos = 0
    for piece in text.split("/"):
        items.append((piece, pos))
        pos += len(piece) + 1
    return items


def designation_alleles(text: str) -> list[str]:
    """Allele labels mentioned by a designation, without resolving it.

    'F' mentions none explicitly. Used to pre-scan profiles for labels
    missing from a frequency table.
    """
    if text == "F":
        return []
    labels = []
    for item, _ in _split_items(text):
        allele, _, _ = item.partition("@")
        if allele:
            labels.append(allele)
    return labels


# Designation resolution is deterministic given (text, b) and both are
# immutable, so results are memoized per background vector. Database scans
# resolve the same handful of designations thousands of times.
_parse_cache: "weakref.WeakKeyDictionary[AlleleVector, dict[str, AlleleVector]]" = (
    weakref.WeakKeyDictionary()
)


def parse_designation(text: str, b: AlleleVector) -> AlleleVector:
    """Resolve a designation string into an allele vector.

    ``b`` supplies both the locus alphabet and the background frequencies
    used for '@B' groups. Raises InputParseError with a character position
    for malformed input, including unknown alleles and weights that cannot
    be reconciled with a total of one.
    """
    per_b = _parse_cache.get(b)
    if per_b is None:
        per_b = {}
        _parse_cache[b] = per_b
    cached = per_b.get(text)
    if cached is None:
        cached = _parse_designation(text, b)
        per_b[text] = cached
    return cached


def _parse_designation(text: str, b: AlleleVector) -> AlleleVector:
    locus = b.locus
    if not text:
        raise InputParseError("empty designation")
    if text == "F":
        return AlleleVector(locus, b.probs)
    if "@" not in text and "/" not in text:
        # Bare single allele: certainty, independent of background.
        delta = np.zeros(locus.k)
        try:
            delta[locus.index(text)] = 1.0
        except UnknownAlleleError as exc:
            raise InputParseError(str(exc), column=1) from None
        return AlleleVector(locus, delta)

    weights = np.zeros(locus.k)
    background = np.zeros(locus.k, dtype=bool)
    run: list[int] = []
    numeric_parts: list[float] = []
    for item, offset in _split_items(text):
        if not item:
            raise InputParseError("empty designation component", column=offset + 1)
        allele, sep, weight_text = item.partition("@")
        if not allele:
            raise InputParseError("missing allele before '@'", column=offset + 1)
        try:
            idx = locus.index(allele)
        except UnknownAlleleError as exc:
            raise InputParseError(str(exc), column=offset + 1) from None
        run.append(idx)
        if not sep:
            continue
        if weight_text == "B":
            background[run] = True
        else:
            try:
                w = float(weight_text)
            except ValueError:
                raise InputParseError(
                    f"unreadable weight '{weight_text}'", column=offset + len(allele) + 2
                ) from None
            if not math.isfinite(w):
                raise InputParseError(
                    f"non-finite weight '{weight_text}'", column=offset + len(allele) + 2
                )
            if w < 0:
                raise InputParseError(
                    f"negative weight {w!r}", column=offset + len(allele) + 2
                )
            for i in run:
                weights[i] += w
                numeric_parts.append(w)
        run = []
    if run:
        background[run] = True

    assigned = math.fsum(numeric_parts)
    if assigned > 1.0 + GPM_SUM_TOL:
        raise InputParseError(f"numeric weights sum to {assigned!r}, above 1")
    if background.any():
        residual = max(0.0, 1.0 - assigned)
        bg_mass = np.where(background, b.probs, 0.0)
        total_bg = float(bg_mass.sum())
        if total_bg <= 0.0:
            if residual > GPM_SUM_TOL:
                raise InputParseError(
                    "background-weighted alleles have zero total background frequency"
                )
            probs = weights
        else:
            probs = weights + residual * (bg_mass / total_bg)
    else:
        if assigned < 1.0 - DESIGNATION_RENORM_BAND:
            raise InputParseError(
                f"numeric weights sum to {assigned!r} and no '@B' group absorbs the residual"
            )
        probs = weights / assigned
    return AlleleVector(locus, probs)


class ContributorTag(str, Enum):
    """Which contributor an allele vector is assigned to."""

    MAJOR = "major"
    MINOR = "minor"
    EITHER = "either"


@dataclass(frozen=True)
class AlleleDesignation:
    """A designation string together with its resolved allele vector."""

    raw: str
    resolved: AlleleVector


@dataclass(frozen=True, eq=False)
class ContributorEncoding:
    """2N allele vectors (N contributors, N in {1, 2}) with assignment tags.

    Supported two-contributor tag patterns:

    * two major + two minor: the pairing is fully determined;
    * one major + one minor + two either: two admissible pairings;
    * four either: three pairings (six ordered assignments).
    """

    designations: tuple[AlleleDesignation, ...]
    tags: tuple[ContributorTag, ...]

    def __post_init__(self):
        object.__setattr__(self, "designations", tuple(self.designations))
        object.__setattr__(self, "tags", tuple(ContributorTag(t) for t in self.tags))
        n = len(self.designations)
        if n not in (2, 4):
            raise DataValidationError(f"expected 2 or 4 allele vectors, got {n}")
        if len(self.tags) != n:
            raise DataValidationError(f"{n} vectors but {len(self.tags)} tags")
        loci = {d.resolved.locus for d in self.designations}
        if len(loci) != 1:
            raise DataValidationError("contributor vectors span multiple loci")
        if n == 2:
            if self.tags[0] != self.tags[1] or self.tags[0] is ContributorTag.EITHER:
                raise DataValidationError(
                    "a single-contributor encoding needs two identical non-'either' tags"
                )
        else:
            _ordered_pairings(self.tags)  # raises on unsupported patterns

    @classmethod
    def from_strings(
        cls,
        texts: tuple[str, ...] | list[str],
        b: AlleleVector,
        tags: tuple[ContributorTag, ...] | list[str] | None = None,
    ) -> "ContributorEncoding":
        """Parse designation strings; tags default to a lone major
        contributor (2 vectors) or all 'either' (4 vectors)."""
        designations = tuple(AlleleDesignation(t, parse_designation(t, b)) for t in texts)
        if tags is None:
            if len(designations) == 2:
                tags = (ContributorTag.MAJOR, ContributorTag.MAJOR)
            else:
                tags = (ContributorTag.EITHER,) * 4
        return cls(designations, tuple(ContributorTag(t) for t in tags))

    @property
    def locus(self) -> Locus:
        return self.designations[0].resolved.locus

    @property
    def n_contributors(self) -> int:
        return len(self.designations) // 2


def _ordered_pairings(
    tags: tuple[ContributorTag, ...]
) -> list[tuple[tuple[int, int], tuple[int, int], float]]:
    """Admissible (contributor-1 pair, contributor-2 pair, weight) triples."""
    majors = [i for i, t in enumerate(tags) if t is ContributorTag.MAJOR]
    minors = [i for i, t in enumerate(tags) if t is ContributorTag.MINOR]
    eithers = [i for i, t in enumerate(tags) if t is ContributorTag.EITHER]
    if len(majors) == 2 and len(minors) == 2:
        return [((majors[0], majors[1]), (minors[0], minors[1]), 1.0)]
    if len(majors) == 1 and len(minors) == 1 and len(eithers) == 2:
        e1, e2 = eithers
        return [
            ((majors[0], e1), (minors[0], e2), 0.5),
            ((majors[0], e2), (minors[0], e1), 0.5),
        ]
    if len(eithers) == 4:
        out = []
        for pair in itertools.combinations(range(4), 2):
            rest = tuple(i for i in range(4) if i not in pair)
            out.append((pair, rest, 1.0 / 6.0))
        return out
    raise DataValidationError(
        "unsupported contributor tag combination: "
        + "/".join(t.value for t in tags)
    )


def assemble_single(u: AlleleVector, v: AlleleVector) -> GPM:
    """GPM of one contributor from its two allele vectors."""
    return gpm_from_allele_vectors(u, v)


def assemble_two_contributors(enc: ContributorEncoding) -> tuple[GPM, GPM]:
    """Marginal GPMs (major, minor) from a four-vector encoding.

    Averages the symmetric product of each contributor's vector pair over
    all pairings admissible under the tags. With four 'either' tags the
    two marginals are identical.
    """
    if enc.n_contributors != 2:
        raise DataValidationError("two-contributor assembly needs 4 allele vectors")
    vecs = [d.resolved.probs for d in enc.designations]
    k = enc.locus.k
    major = np.zeros((k, k))
    minor = np.zeros((k, k))
    for (a, bidx), (c, d), weight in _ordered_pairings(enc.tags):
        first = np.outer(vecs[a], vecs[bidx])
        second = np.outer(vecs[c], vecs[d])
        major += weight * (first + first.T) / 2.0
        minor += weight * (second + second.T) / 2.0
    return GPM(enc.locus, major), GPM(enc.locus, minor)


Genotype = tuple[str, str]


@dataclass(frozen=True, eq=False)
class JointGenotypeTable:
    """Joint distribution over (contributor-1 genotype, contributor-2
    genotype) pairs, keyed by unordered allele-label pairs.

    Heterozygote ordering factors are folded into the values, so the table
    sums to one and its marginals are ordinary genotype distributions.
    """

    locus: Locus
    probs: Mapping[tuple[Genotype, Genotype], float]

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))

    def total(self) -> float:
        return math.fsum(self.probs.values())

    def probability(self, geno1: Genotype, geno2: Genotype) -> float:
        return self.probs.get((_canonical(self.locus, geno1), _canonical(self.locus, geno2)), 0.0)

    def marginal(self, contributor: int) -> GPM:
        """GPM of contributor 1 or 2 implied by the table."""
        if contributor not in (1, 2):
            raise DataValidationError("contributor must be 1 or 2")
        k = self.locus.k
        entries = np.zeros((k, k))
        for (g1, g2), p in self.probs.items():
            geno = g1 if contributor == 1 else g2
            i = self.locus.index(geno[0])
            j = self.locus.index(geno[1])
            if i == j:
                entries[i, i] += p
            else:
                entries[i, j] += p / 2.0
                entries[j, i] += p / 2.0
        return GPM(self.locus, entries)


def _canonical(locus: Locus, geno: Genotype) -> Genotype:
    i = locus.index(geno[0])
    j = locus.index(geno[1])
    return geno if i <= j else (geno[1], geno[0])


def _genotype_distribution(locus: Locus, x: np.ndarray, y: np.ndarray) -> dict[Genotype, float]:
    """Unordered genotype probabilities for alleles drawn from x and y."""
    out: dict[Genotype, float] = {}
    k = locus.k
    for i in range(k):
        for j in range(i, k):
            p = x[i] * y[i] if i == j else x[i] * y[j] + x[j] * y[i]
            if p > 0.0:
                out[(locus.alleles[i], locus.alleles[j])] = float(p)
    return out


def joint_table(enc: ContributorEncoding) -> JointGenotypeTable:
    """Joint genotype table for a two-contributor encoding.

    Within each admissible pairing the two contributors' genotypes are
    independent; the table averages those products over pairings. Its
    marginals equal the GPMs from :func:`assemble_two_contributors`.
    """
    if enc.n_contributors != 2:
        raise DataValidationError("a joint genotype table needs 4 allele vectors")
    vecs = [d.resolved.probs for d in enc.designations]
    table: dict[tuple[Genotype, Genotype], float] = {}
    for (a, bidx), (c, d), weight in _ordered_pairings(enc.tags):
        dist1 = _genotype_distribution(enc.locus, vecs[a], vecs[bidx])
        dist2 = _genotype_distribution(enc.locus, vecs[c], vecs[d])
        for g1, p1 in dist1.items():
            for g2, p2 in dist2.items():
                key = (g1, g2)
                table[key] = table.get(key, 0.0) + weight * p1 * p2
    return JointGenotypeTable(enc.locus, table)


def dropout_interpolation(
    gamma: float,
    delta: float,
    certain: str,
    doubtful: str,
    b: AlleleVector,
) -> GPM:
    """Genotype distribution for one certain allele and one doubtful peak.

    With A certain and B the doubtful peak: P(AA) = gamma (1 - delta) +
    gamma delta b_A, P(AB) = (1 - gamma) + gamma delta b_B, and
    P(AX) = gamma delta b_X for every other allele X. ``gamma`` is the
    probability that the doubtful peak is not allelic for this donor;
    ``delta`` interpolates between ignoring dropout (0) and treating the
    second allele as fully unknown (1).
    """
    if not 0.0 <= gamma <= 1.0:
        raise DataValidationError(f"gamma must be in [0, 1], got {gamma!r}")
    if not 0.0 <= delta <= 1.0:
        raise DataValidationError(f"delta must be in [0, 1], got {delta!r}")
    locus = b.locus
    a = locus.index(certain)
    d = locus.index(doubtful)
    if a == d:
        raise DataValidationError("certain and doubtful alleles must differ")
    entries = np.zeros((locus.k, locus.k))
    base = gamma * delta * b.probs  # P(A paired with X) before the fixed terms
    for x in range(locus.k):
        if x == a:
            entries[a, a] += base[x]
        else:
            entries[a, x] += base[x] / 2.0
            entries[x, a] += base[x] / 2.0
    entries[a, a] += gamma * (1.0 - delta)
    entries[a, d] += (1.0 - gamma) / 2.0
    entries[d, a] += (1.0 - gamma) / 2.0
    return GPM(locus, entries)
