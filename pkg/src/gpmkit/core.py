"""Allele alphabets, background frequencies, and genotype probability matrices.

A genotype probability matrix (GPM) over a locus with k recognised alleles
is a symmetric k-by-k matrix with nonnegative entries summing to one. The
diagonal holds homozygote probabilities; each off-diagonal cell holds half
the probability of the corresponding heterozygote, so the two mirror cells
jointly carry it. An allele vector is a length-k distribution for a single
transmitted allele. The background frequency vector b is the population
allele vector, and the background GPM of an unprofiled individual is the
outer product b^T b (allele independence within a locus).

All types here are immutable after construction; arrays are stored
read-only, so instances are safe to share across threads and workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DataValidationError, InputParseError, UnknownAlleleError

#: |sum - 1| tolerance for probability vectors and matrices.
GPM_SUM_TOL = 1e-9

#: |G_ij - G_ji| beyond which validation reports asymmetry.
GPM_SYMMETRY_TOL = 1e-12

#: Frequency tables whose per-locus sum lies within this band of 1 are
#: renormalized on ingestion; anything further off is rejected. This band
#: applies to ingestion only, never to computed matrices.
FREQ_SUM_BAND = 1e-6

FREQUENCY_HEADER = ("locus", "allele", "frequency")


def _readonly_array(values, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != shape:
        raise DataValidationError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Locus:
    """A named locus with an ordered allele alphabet.

    Allele labels are opaque strings (microvariants like "12.3" are fine);
    their order here is the canonical index order for every vector and
    matrix over this locus.
    """

    name: str
    alleles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "alleles", tuple(self.alleles))
        if len(self.alleles) < 1:
            raise DataValidationError(f"locus '{self.name}' has no alleles")
        if len(set(self.alleles)) != len(self.alleles):
            raise DataValidationError(f"locus '{self.name}' has duplicate allele labels")
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.alleles)})

    @property
    def k(self) -> int:
        return len(self.alleles)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownAlleleError(self.name, label) from None

    def __contains__(self, label: str) -> bool:
        return label in self._index


@dataclass(frozen=True, eq=False)
class AlleleVector:
    """Probability distribution of one allele over a locus alphabet.

    Used both for the population background b and for the per-contributor
    parental allele vectors that GPMs factor into.
    """

    locus: Locus
    probs: np.ndarray

    def __post_init__(self):
        probs = _readonly_array(self.probs, (self.locus.k,))
        if not np.all(np.isfinite(probs)):
            raise DataValidationError(f"allele vector for '{self.locus.name}' has non-finite entries")
        if np.any(probs < 0):
            raise DataValidationError(f"allele vector for '{self.locus.name}' has negative entries")
        total = float(probs.sum())
        if abs(total - 1.0) > GPM_SUM_TOL:
            raise DataValidationError(
                f"allele vector for '{self.locus.name}' sums to {total!r}, not 1"
            )
        object.__setattr__(self, "probs", probs)


#: Alias used where a vector specifically means population background
#: frequencies rather than one contributor's allele distribution.
AlleleFreqVector = AlleleVector


@dataclass(frozen=True, eq=False)
class GPM:
    """Genotype probability matrix over a locus.

    The constructor only checks the shape; numeric invariants (symmetry,
    nonnegativity, unit sum) are enforced by the constructors in this
    module and checked by :func:`validate`, which reports violations
    without raising so that suspect data can be inspected.
    """

    locus: Locus
    entries: np.ndarray

    def __post_init__(self):
        entries = _readonly_array(self.entries, (self.locus.k, self.locus.k))
        object.__setattr__(self, "entries", entries)


def background_gpm(b: AlleleVector) -> GPM:
    """GPM of an unprofiled individual: B = b^T b."""
    return GPM(b.locus, np.outer(b.probs, b.probs))


def gpm_from_genotype(locus: Locus, allele_i: str, allele_j: str) -> GPM:
    """GPM assigning probability one to a single genotype."""
    i = locus.index(allele_i)
    j = locus.index(allele_j)
    entries = np.zeros((locus.k, locus.k))
    if i == j:
        entries[i, i] = 1.0
    else:
        entries[i, j] = 0.5
        entries[j, i] = 0.5
    return GPM(locus, entries)


def gpm_from_allele_vectors(u: AlleleVector, v: AlleleVector) -> GPM:
    """GPM of an individual whose two alleles are drawn from u and v.

    G = (u^T v + v^T u) / 2, symmetric by construction and summing to one.
    """
    if u.locus != v.locus:
        raise DataValidationError(
            f"allele vectors are over different loci: '{u.locus.name}' vs '{v.locus.name}'"
        )
    outer = np.outer(u.probs, v.probs)
    return GPM(u.locus, (outer + outer.T) / 2.0)


def marginal_allele_vector(G: GPM) -> AlleleVector:
    """Allele distribution implied by a GPM: row sums (= column sums)."""
    return AlleleVector(G.locus, G.entries.sum(axis=1))


def genotype_probability(G: GPM, allele_i: str, allele_j: str) -> float:
    """Probability of an unordered genotype: G_ii, or 2 G_ij for i != j."""
    i = G.locus.index(allele_i)
    j = G.locus.index(allele_j)
    if i == j:
        return float(G.entries[i, i])
    return float(2.0 * G.entries[i, j])


def iter_genotypes(locus: Locus) -> Iterator[tuple[int, int]]:
    """All unordered genotypes as index pairs (i, j) with i <= j."""
    for i in range(locus.k):
        for j in range(i, locus.k):
            yield i, j


def validate(G: GPM) -> list[str]:
    """Report every violated GPM invariant; an empty list means valid.

    Never raises: importers raise on a nonempty report, but callers may
    also want to log and continue.
    """
    report: list[str] = []
    e = G.entries
    if not np.all(np.isfinite(e)):
        report.append("non-finite entries present")
        return report
    worst_negative = float(e.min())
    if worst_negative < 0:
        report.append(f"negative entry: minimum is {worst_negative!r}")
    asym = float(np.abs(e - e.T).max())
    if asym > GPM_SYMMETRY_TOL:
        report.append(f"asymmetry: max |G_ij - G_ji| = {asym!r}")
    total = float(e.sum())
    if abs(total - 1.0) > GPM_SUM_TOL:
        report.append(f"sum deviation: entries total {total!r}")
    return report


def assert_valid_gpm(G: GPM, context: str = "") -> None:
    """Raise DataValidationError if :func:`validate` reports anything."""
    report = validate(G)
    if report:
        prefix = f"{context}: " if context else ""
        raise DataValidationError(prefix + "; ".join(report))


def load_frequencies(text: str) -> dict[str, AlleleVector]:
    """Parse a frequency table into per-locus background vectors.

    Format: comma-separated with header ``locus,allele,frequency``, one
    row per allele; lines starting with ``#`` are comments and blank lines
    are skipped. Allele order within a locus follows first appearance and
    becomes the canonical index order shared by every profile.
    """
    labels: dict[str, list[str]] = {}
    freqs: dict[str, list[float]] = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if tuple(f.lower() for f in fields) != FREQUENCY_HEADER:
                raise InputParseError(
                    f"expected header '{','.join(FREQUENCY_HEADER)}', got '{line}'", line=lineno
                )
            header_seen = True
            continue
        if len(fields) != 3:
            raise InputParseError(f"expected 3 comma-separated fields, got {len(fields)}", line=lineno)
        locus_name, allele, freq_text = fields
        if not locus_name or not allele:
            raise InputParseError("empty locus or allele field", line=lineno)
        try:
            freq = float(freq_text)
        except ValueError:
            raise InputParseError(f"unreadable frequency '{freq_text}'", line=lineno) from None
        if not math.isfinite(freq):
            raise InputParseError(f"non-finite frequency '{freq_text}'", line=lineno)
        if freq < 0:
            raise DataValidationError(
                f"negative frequency {freq!r} for locus '{locus_name}', allele '{allele}' (line {lineno})"
            )
        if allele in labels.setdefault(locus_name, []):
            raise DataValidationError(
                f"duplicate frequency row for locus '{locus_name}', allele '{allele}' (line {lineno})"
            )
        labels[locus_name].append(allele)
        freqs.setdefault(locus_name, []).append(freq)
    if not header_seen:
        raise InputParseError("frequency table is empty")

    out: dict[str, AlleleVector] = {}
    for name in labels:
        total = math.fsum(freqs[name])
        # The 1e-12 slack keeps sums sitting exactly on the band edge
        # (e.g. 0.999999 as a float) inside it.
        if abs(total - 1.0) > FREQ_SUM_BAND + 1e-12:
            raise DataValidationError(
                f"frequencies for locus '{name}' sum to {total!r}, outside the "
                f"±{FREQ_SUM_BAND:g} ingestion band"
            )
        probs = np.array(freqs[name], dtype=np.float64) / total
        out[name] = AlleleVector(Locus(name, tuple(labels[name])), probs)
    return out


def read_frequencies(path) -> dict[str, AlleleVector]:
    """Load a frequency table from a file path (UTF-8)."""
    with open(path, "r", encoding="utf-8") as fh:
        return load_frequencies(fh.read())


def extend_frequencies(
    freqs: Mapping[str, AlleleVector],
    extra_alleles: Mapping[str, Iterable[str]],
    floor: float,
) -> dict[str, AlleleVector]:
    """Append unseen allele labels at a fixed floor frequency.

    Returns a new frequency mapping where each locus named in
    ``extra_alleles`` gains any labels missing from its alphabet, each at
    probability ``floor``; existing entries are rescaled so the vector
    still sums to one. Loci not mentioned are passed through unchanged.
    By default the rest of the package treats unknown alleles as errors;
    this is the explicit opt-in for rare alleles absent from the table.
    """
    if not 0.0 < floor < 1.0:
        raise DataValidationError(f"frequency floor must be in (0, 1), got {floor!r}")
    out = dict(freqs)
    for name, wanted in extra_alleles.items():
        if name not in freqs:
            raise DataValidationError(
                f"cannot add floor alleles: locus '{name}' is not in the frequency set"
            )
        base = freqs[name]
        new_labels = sorted({lab for lab in wanted if lab not in base.locus})
        if not new_labels:
            continue
        added = floor * len(new_labels)
        if added >= 1.0:
            raise DataValidationError(
                f"floor {floor!r} over {len(new_labels)} new alleles at locus '{name}' "
                "leaves no mass for observed alleles"
            )
        locus = Locus(name, base.locus.alleles + tuple(new_labels))
        probs = np.concatenate([base.probs * (1.0 - added), np.full(len(new_labels), floor)])
        out[name] = AlleleVector(locus, probs)
    return out
