"""Relationship transforms of genotype probability matrices.

Given a profile GPM G with marginal allele vector x and background b, the
GPM of a relative is:

    degree 1 (parent or child):  (x^T b + b^T x) / 2
    degree n (n lineage links):  (x^T b + b^T x + (2^n - 2) b^T b) / 2^n
    full sibling:                (G + x^T b + b^T x + b^T b) / 4

All of these fix the background: R(B) = B. A stepwise mutation matrix M
can be threaded through the unilineal transforms by replacing the lineage
vector x with x M once per parent-child link. The sibling transform has no
mutation variant here, and requesting one is an error rather than a silent
ignore.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from enum import Enum
from functools import lru_cache

import numpy as np

from .core import GPM, AlleleVector, Locus, marginal_allele_vector
from .errors import DataValidationError, InputParseError

#: Row-sum tolerance for mutation matrices.
MUTATION_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MutationMatrix:
    """Per-meiosis allele transition matrix: entry (i, j) is the
    probability that a parental i allele is transmitted as j."""

    locus: Locus
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64, copy=True)
        k = self.locus.k
        if entries.shape != (k, k):
            raise DataValidationError(f"mutation matrix must be {k}x{k}, got {entries.shape}")
        if np.any(entries < 0):
            raise DataValidationError("mutation matrix has negative entries")
        rows = entries.sum(axis=1)
        worst = float(np.abs(rows - 1.0).max())
        if worst > MUTATION_ROW_TOL:
            raise DataValidationError(f"mutation matrix rows must sum to 1 (off by {worst!r})")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)


def _repeat_counts(locus: Locus) -> dict[Decimal, int]:
    counts: dict[Decimal, int] = {}
    for i, label in enumerate(locus.alleles):
        try:
            value = Decimal(label)
        except InvalidOperation:
            raise InputParseError(
                f"allele label '{label}' at locus '{locus.name}' is not a decimal repeat count"
            ) from None
        if value in counts:
            raise DataValidationError(
                f"locus '{locus.name}' has two alleles with repeat count {value}"
            )
        counts[value] = i
    return counts


def build_mutation_matrix(locus: Locus, rate: float, up_fraction: float = 0.5) -> MutationMatrix:
    """Stepwise mutation matrix over an STR allele alphabet.

    Allele labels must parse as decimal repeat counts (microvariants like
    "12.3" are fine). Each transmission mutates with probability ``rate``;
    a mutation moves exactly one repeat unit, up with probability
    ``up_fraction``. A step that would leave the alphabet, or land on a
    missing neighbor (e.g. across a microvariant gap), stays put instead,
    so rows always sum to one.
    """
    if not 0.0 <= rate < 1.0:
        raise DataValidationError(f"mutation rate must be in [0, 1), got {rate!r}")
    if not 0.0 <= up_fraction <= 1.0:
        raise DataValidationError(f"up fraction must be in [0, 1], got {up_fraction!r}")
    counts = _repeat_counts(locus)
    k = locus.k
    entries = np.zeros((k, k))
    up = rate * up_fraction
    down = rate * (1.0 - up_fraction)
    for value, i in counts.items():
        entries[i, i] = 1.0 - rate
        j_up = counts.get(value + 1)
        j_down = counts.get(value - 1)
        if j_up is None:
            entries[i, i] += up
        else:
            entries[i, j_up] = up
        if j_down is None:
            entries[i, i] += down
        else:
            entries[i, j_down] = down
    return MutationMatrix(locus, entries)


@dataclass(frozen=True)
class MutationModel:
    """Locus-independent stepwise mutation settings.

    Instantiated as a concrete matrix per locus on demand; matrices are
    cached because loci are shared immutable values.
    """

    rate: float
    up_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise DataValidationError(f"mutation rate must be in [0, 1), got {self.rate!r}")
        if not 0.0 <= self.up_fraction <= 1.0:
            raise DataValidationError(f"up fraction must be in [0, 1], got {self.up_fraction!r}")

    def matrix_for(self, locus: Locus) -> MutationMatrix:
        return _cached_matrix(locus, self.rate, self.up_fraction)


@lru_cache(maxsize=None)
def _cached_matrix(locus: Locus, rate: float, up_fraction: float) -> MutationMatrix:
    return build_mutation_matrix(locus, rate, up_fraction)


class RelationshipKind(Enum):
    SAME = "same"
    DEGREE = "degree"
    SIBLING = "sibling"


@dataclass(frozen=True)
class RelationshipSpec:
    """A pairwise relationship hypothesis, optionally with mutation.

    ``degree`` counts parent-child links for unilineal relatives (1 =
    parent/child, 2 = grandparent/half-sibling/uncle, ...). Mutation only
    applies to degree transforms; combining it with the sibling transform
    raises at construction.
    """

    kind: RelationshipKind
    degree: int = 0
    mutation: MutationMatrix | None = None

    def __post_init__(self):
        if self.kind is RelationshipKind.DEGREE:
            if self.degree < 1:
                raise DataValidationError(f"degree must be >= 1, got {self.degree!r}")
        elif self.degree != 0:
            raise DataValidationError(f"{self.kind.value} relationship takes no degree")
        if self.kind is RelationshipKind.SIBLING and self.mutation is not None:
            raise DataValidationError("the sibling transform has no mutation variant")

    @property
    def label(self) -> str:
        if self.kind is RelationshipKind.SAME:
            return "same"
        if self.kind is RelationshipKind.SIBLING:
            return "sibling"
        return f"d{self.degree}"

    def with_mutation(self, mutation: MutationMatrix | None) -> "RelationshipSpec":
        if mutation is None:
            return self
        return replace(self, mutation=mutation)

    @staticmethod
    def same() -> "RelationshipSpec":
        return RelationshipSpec(RelationshipKind.SAME)

    @staticmethod
    def degree_n(n: int, mutation: MutationMatrix | None = None) -> "RelationshipSpec":
        return RelationshipSpec(RelationshipKind.DEGREE, degree=n, mutation=mutation)

    @staticmethod
    def sibling() -> "RelationshipSpec":
        return RelationshipSpec(RelationshipKind.SIBLING)


# Named relationships accepted on the command line and in queries. The
# degree aliases group relatives by the number of lineage links.
_ALIASES: dict[str, tuple[RelationshipKind, int]] = {
    "same": (RelationshipKind.SAME, 0),
    "identity": (RelationshipKind.SAME, 0),
    "sibling": (RelationshipKind.SIBLING, 0),
    "full-sibling": (RelationshipKind.SIBLING, 0),
    "parent": (RelationshipKind.DEGREE, 1),
    "child": (RelationshipKind.DEGREE, 1),
    "grandparent": (RelationshipKind.DEGREE, 2),
    "grandchild": (RelationshipKind.DEGREE, 2),
    "uncle": (RelationshipKind.DEGREE, 2),
    "aunt": (RelationshipKind.DEGREE, 2),
    "nephew": (RelationshipKind.DEGREE, 2),
    "niece": (RelationshipKind.DEGREE, 2),
    "half-sibling": (RelationshipKind.DEGREE, 2),
    "great-grandparent": (RelationshipKind.DEGREE, 3),
    "great-grandchild": (RelationshipKind.DEGREE, 3),
    "great-aunt": (RelationshipKind.DEGREE, 3),
    "great-uncle": (RelationshipKind.DEGREE, 3),
    "great-niece": (RelationshipKind.DEGREE, 3),
    "great-nephew": (RelationshipKind.DEGREE, 3),
    "first-cousin": (RelationshipKind.DEGREE, 3),
    "cousin": (RelationshipKind.DEGREE, 3),
}

_DEGREE_RE = re.compile(r"^(?:d|dn:)([0-9]+)$")


def parse_relationship(name: str) -> RelationshipSpec:
    """Resolve a relationship name ('same', 'sibling', 'parent', 'd2',
    'dN:<n>', common kinship aliases) into a spec without mutation."""
    key = name.strip().lower().replace("_", "-").replace(" ", "-")
    if key in _ALIASES:
        kind, degree = _ALIASES[key]
        return RelationshipSpec(kind, degree=degree)
    m = _DEGREE_RE.match(key)
    if m:
        n = int(m.group(1))
        if n >= 1:
            return RelationshipSpec.degree_n(n)
    raise InputParseError(f"unknown relationship '{name}'")


def _check_locus(G: GPM, b: AlleleVector, mutation: MutationMatrix | None) -> None:
    if G.locus != b.locus:
        raise DataValidationError(
            f"profile locus '{G.locus.name}' does not match background locus '{b.locus.name}'"
        )
    if mutation is not None and mutation.locus != G.locus:
        raise DataValidationError(
            f"mutation matrix locus '{mutation.locus.name}' does not match '{G.locus.name}'"
        )


def _lineage_vector(G: GPM, n: int, mutation: MutationMatrix | None) -> np.ndarray:
    x = marginal_allele_vector(G).probs
    if mutation is not None:
        for _ in range(n):
            x = x @ mutation.entries
    return x


def rel_d1(G: GPM, b: AlleleVector, mutation: MutationMatrix | None = None) -> GPM:
    """GPM of a parent or child of the profiled individual."""
    _check_locus(G, b, mutation)
    x = _lineage_vector(G, 1, mutation)
    outer = np.outer(x, b.probs)
    return GPM(G.locus, (outer + outer.T) / 2.0)


def rel_dn(G: GPM, b: AlleleVector, n: int, mutation: MutationMatrix | None = None) -> GPM:
    """GPM of a degree-n unilineal relative (n parent-child links)."""
    if n < 1:
        raise DataValidationError(f"degree must be >= 1, got {n!r}")
    _check_locus(G, b, mutation)
    x = _lineage_vector(G, n, mutation)
    outer = np.outer(x, b.probs)
    B = np.outer(b.probs, b.probs)
    scale = float(2**n)
    return GPM(G.locus, (outer + outer.T + (scale - 2.0) * B) / scale)


def rel_sibling(G: GPM, b: AlleleVector) -> GPM:
    """GPM of a full sibling of the profiled individual."""
    _check_locus(G, b, None)
    x = marginal_allele_vector(G).probs
    outer = np.outer(x, b.probs)
    B = np.outer(b.probs, b.probs)
    return GPM(G.locus, (G.entries + outer + outer.T + B) / 4.0)


def rel_transform(G: GPM, spec: RelationshipSpec, b: AlleleVector) -> GPM:
    """Dispatch to the transform named by ``spec``."""
    if spec.kind is RelationshipKind.SAME:
        return G
    if spec.kind is RelationshipKind.DEGREE:
        return rel_dn(G, b, spec.degree, spec.mutation)
    return rel_sibling(G, b)
