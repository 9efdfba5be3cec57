"""Likelihood ratios between genotype probability matrices.

The same-source ratio against unrelated donors sums G1 G2 / B elementwise
over the matrix. Relationship hypotheses transform the second profile
first, so the numerator becomes sum of G1 R(G2) / B. With coancestry
(theta > 0 within a subpopulation) the two donors' genotypes are no longer
independent under the alternative, and the ratio picks up a correction
denominator built from conditional background matrices:

    denominator = sum_ij G1_ij H_ij,   H_ij = sum_pq G2_pq B_pq|ij / B_pq

where B_|ij is the background GPM for a second individual conditioned on
observing genotype ij in the first. The conditional matrices use the
Balding-Nichols sampling formula: the probability that the next sampled
allele is a, after n alleles containing m_a copies of a, equals
(m_a theta + (1 - theta) b_a) / (1 + (n - 1) theta).

Cells where the numerator product is zero contribute nothing even when the
background cell is zero; a zero background cell under a supported genotype
makes the ratio undefined and raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import GPM, AlleleVector, background_gpm
from .errors import DataValidationError, NoSharedLociError, UndefinedLikelihoodError
from .relatives import (
    MutationMatrix,
    MutationModel,
    RelationshipKind,
    RelationshipSpec,
    rel_transform,
)


@dataclass(frozen=True)
class CoancestryParams:
    """Coancestry (F_ST, often written theta) within a subpopulation."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise DataValidationError(f"theta must be in [0, 1), got {self.theta!r}")

    def __float__(self) -> float:
        return self.theta


def _theta_value(theta) -> float:
    value = float(theta)
    if not 0.0 <= value < 1.0:
        raise DataValidationError(f"theta must be in [0, 1), got {value!r}")
    return value


@dataclass(frozen=True)
class LocusLR:
    """Single-locus likelihood ratio with its correction denominator.

    ``denominator`` is the coancestry correction factor; it is exactly 1
    when theta is 0, so ``lr`` equals ``numerator`` in that case.
    """

    locus: str
    lr: float
    numerator: float
    denominator: float

    @property
    def log10(self) -> float:
        return math.log10(self.lr) if self.lr > 0.0 else float("-inf")


@dataclass(frozen=True)
class MultiLocusLR:
    """Per-locus ratios with their product across independent loci.

    The product is accumulated in log space; ``overall`` is recovered from
    ``log10_overall`` so many-locus profiles cannot overflow mid-product.
    ``skipped`` lists loci left out because they were missing from one
    profile or from the frequency set.
    """

    per_locus: tuple[LocusLR, ...]
    overall: float
    log10_overall: float
    skipped: tuple[str, ...] = ()


def _ratio_sum(numerator: np.ndarray, B: np.ndarray, locus_name: str, context: str) -> float:
    """Sum numerator / B over cells, with zero-numerator cells contributing
    zero regardless of B. Raises when a supported cell has zero background."""
    mask = numerator > 0.0
    bad = mask & (B == 0.0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise UndefinedLikelihoodError(
            f"{context} at locus '{locus_name}': genotype cell ({i}, {j}) has support "
            "but zero background probability"
        )
    if not mask.any():
        return 0.0
    return float((numerator[mask] / B[mask]).sum())


def _same_locus(G1: GPM, G2: GPM, B: GPM | None) -> None:
    if G1.locus != G2.locus:
        raise DataValidationError(
            f"profiles are over different loci: '{G1.locus.name}' vs '{G2.locus.name}'"
        )
    if B is not None and B.locus != G1.locus:
        raise DataValidationError(
            f"background locus '{B.locus.name}' does not match '{G1.locus.name}'"
        )


def lr_same(G1: GPM, G2: GPM, B: GPM) -> LocusLR:
    """Same-donor vs unrelated-donors ratio: sum of G1 G2 / B."""
    _same_locus(G1, G2, B)
    value = _ratio_sum(G1.entries * G2.entries, B.entries, G1.locus.name, "same-donor ratio")
    return LocusLR(G1.locus.name, value, value, 1.0)


def lr_related(
    G1: GPM,
    G2: GPM,
    spec: RelationshipSpec,
    b: AlleleVector,
    B: GPM | None = None,
) -> LocusLR:
    """Ratio for 'G1's donor is an R-relative of G2's donor' vs unrelated.

    The relationship transform is applied to G2; with spec 'same' this
    reduces to :func:`lr_same` exactly.
    """
    if B is None:
        B = background_gpm(b)
    _same_locus(G1, G2, B)
    relative = rel_transform(G2, spec, b)
    value = _ratio_sum(
        G1.entries * relative.entries, B.entries, G1.locus.name, f"'{spec.label}' ratio"
    )
    return LocusLR(G1.locus.name, value, value, 1.0)


def sibling_lr_closed_form(
    geno1: tuple[str, str], geno2: tuple[str, str], b: AlleleVector
) -> float:
    """Closed-form full-sibling ratio for two certain genotypes.

    For genotypes (p, q) and (r, s):

        (1/8) [ (1 + d_pr / b_p)(1 + d_qs / b_q)
              + (1 + d_qr / b_q)(1 + d_ps / b_p) ]

    with d the Kronecker delta. Serves as an independent oracle for
    :func:`lr_related` with the sibling transform.
    """
    locus = b.locus
    p, q = (locus.index(a) for a in geno1)
    r, s = (locus.index(a) for a in geno2)
    for idx, label in ((p, geno1[0]), (q, geno1[1])):
        if b.probs[idx] == 0.0:
            raise UndefinedLikelihoodError(
                f"observed allele '{label}' has zero background frequency at locus '{locus.name}'"
            )
    bp = float(b.probs[p])
    bq = float(b.probs[q])
    term1 = (1.0 + (1.0 if p == r else 0.0) / bp) * (1.0 + (1.0 if q == s else 0.0) / bq)
    term2 = (1.0 + (1.0 if q == r else 0.0) / bq) * (1.0 + (1.0 if p == s else 0.0) / bp)
    return (term1 + term2) / 8.0


def conditional_gpm(genotype: tuple[str, str], b: AlleleVector, theta) -> GPM:
    """Background GPM for a second individual, conditioned on observing
    ``genotype`` in a first individual from the same subpopulation.

    Sequential sampling: both conditioning alleles count as already seen,
    then the two alleles of the second individual are drawn with the
    coancestry-adjusted formula. At theta = 0 this is exactly the
    unconditional background b^T b.
    """
    theta = _theta_value(theta)
    locus = b.locus
    counts = np.zeros(locus.k)
    counts[locus.index(genotype[0])] += 1.0
    counts[locus.index(genotype[1])] += 1.0
    return GPM(locus, _conditional_entries(counts, b.probs, theta))


def _conditional_entries(counts: np.ndarray, b: np.ndarray, theta: float) -> np.ndarray:
    # Third draw uses A_a = m_a theta + (1 - theta) b_a over (1 + theta);
    # the fourth adds one count of the third draw's allele, i.e. A + theta
    # on the diagonal, over (1 + 2 theta). Writing the cell as an outer
    # product keeps the matrix exactly symmetric.
    A = counts * theta + (1.0 - theta) * b
    entries = np.outer(A, A)
    np.fill_diagonal(entries, A * (A + theta))
    entries /= (1.0 + theta) * (1.0 + 2.0 * theta)
    return entries


def subpop_correction(G1: GPM, G2: GPM, b: AlleleVector, theta) -> float:
    """Coancestry correction factor: the denominator of the general ratio.

    Equals sum_ij G1_ij H_ij with H_ij = sum_pq G2_pq B_pq|ij / B_pq.
    Exactly 1.0 at theta = 0. G1 is the conditioning profile, so argument
    order matters when theta > 0.
    """
    theta = _theta_value(theta)
    _same_locus(G1, G2, None)
    if G1.locus != b.locus:
        raise DataValidationError(
            f"background locus '{b.locus.name}' does not match '{G1.locus.name}'"
        )
    if theta == 0.0:
        return 1.0
    B = np.outer(b.probs, b.probs)
    k = G1.locus.k
    total = 0.0
    base_counts = np.zeros(k)
    for i in range(k):
        for j in range(k):
            g1 = G1.entries[i, j]
            if g1 == 0.0:
                continue
            counts = base_counts.copy()
            counts[i] += 1.0
            counts[j] += 1.0
            cond = _conditional_entries(counts, b.probs, theta)
            total += g1 * _h_term(G2.entries, cond, B, G1.locus.name)
    return total


def _h_term(G2: np.ndarray, cond: np.ndarray, B: np.ndarray, locus_name: str) -> float:
    mask = G2 > 0.0
    bad = mask & (B == 0.0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise UndefinedLikelihoodError(
            f"coancestry correction at locus '{locus_name}': genotype cell ({i}, {j}) "
            "has support but zero background probability"
        )
    if not mask.any():
        return 0.0
    return float((G2[mask] * cond[mask] / B[mask]).sum())


def lr_general(
    G1: GPM,
    G2: GPM,
    spec: RelationshipSpec,
    b: AlleleVector,
    theta=0.0,
    mutation: MutationMatrix | None = None,
) -> LocusLR:
    """Most general single-locus ratio: relationship transform in the
    numerator, coancestry correction in the denominator.

    ``mutation`` overrides any matrix carried by ``spec``. When theta > 0
    the denominator conditions contributor 2's genotype on contributor
    1's, so G1 is the conditioning profile and argument order matters.
    """
    theta = _theta_value(theta)
    effective = spec.with_mutation(mutation) if mutation is not None else spec
    numerator = lr_related(G1, G2, effective, b).numerator
    denominator = subpop_correction(G1, G2, b, theta)
    return LocusLR(G1.locus.name, numerator / denominator, numerator, denominator)


def multi_locus_lr(
    gpms1: Mapping[str, GPM],
    gpms2: Mapping[str, GPM],
    spec: RelationshipSpec,
    freqs: Mapping[str, AlleleVector],
    theta=0.0,
    mutation_model: MutationModel | None = None,
) -> MultiLocusLR:
    """Product of single-locus ratios over loci shared by both profiles.

    Profiles are resolved locus-name-to-GPM mappings. Loci present in only
    one profile, or shared but absent from the frequency set, are skipped
    and listed. Raises NoSharedLociError when nothing remains.
    """
    theta = _theta_value(theta)
    used = [name for name in freqs if name in gpms1 and name in gpms2]
    if not used:
        raise NoSharedLociError("profiles share no locus present in the frequency set")
    skipped = sorted(
        (set(gpms1) ^ set(gpms2)) | {n for n in gpms1 if n in gpms2 and n not in freqs}
    )
    per_locus = []
    log10_total = 0.0
    for name in used:
        b = freqs[name]
        locus_spec = spec
        if mutation_model is not None and spec.kind is RelationshipKind.DEGREE:
            locus_spec = spec.with_mutation(mutation_model.matrix_for(b.locus))
        result = lr_general(gpms1[name], gpms2[name], locus_spec, b, theta)
        per_locus.append(result)
        log10_total += result.log10
    return MultiLocusLR(
        per_locus=tuple(per_locus),
        overall=10.0**log10_total,
        log10_overall=log10_total,
        skipped=tuple(skipped),
    )
