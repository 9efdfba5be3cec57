"""Shared test utilities: GPM builders and hypothesis strategies."""

import hypothesis.extra.numpy as npst
import numpy as np
from hypothesis import strategies as st

from gpmkit import GPM, AlleleVector, Locus


def gpm_of(locus, geno_probs):
    """Build a GPM from unordered genotype probabilities keyed by labels."""
    m = np.zeros((locus.k, locus.k))
    for (a1, a2), p in geno_probs.items():
        i, j = locus.index(a1), locus.index(a2)
        if i == j:
            m[i, i] += p
        else:
            m[i, j] += p / 2.0
            m[j, i] += p / 2.0
    return GPM(locus, m)


def random_background(rng, k, floor=0.02):
    probs = rng.dirichlet(np.ones(k)) + floor
    return probs / probs.sum()


def random_gpm_entries(rng, k, zero_prob=0.35):
    """Random valid GPM cells with structural zeros sprinkled in."""
    m = rng.random((k, k)) * (rng.random((k, k)) > zero_prob)
    m = (m + m.T) / 2.0
    if m.sum() == 0.0:
        m[0, 0] = 1.0
    return m / m.sum()


def make_locus(k, name="H1"):
    return Locus(name, tuple(str(10 + i) for i in range(k)))


@st.composite
def backgrounds(draw, min_k=2, max_k=6):
    """Strictly positive background vectors over a fresh locus."""
    k = draw(st.integers(min_value=min_k, max_value=max_k))
    raw = draw(
        npst.arrays(
            np.float64,
            (k,),
            elements=st.floats(min_value=0.01, max_value=1.0, allow_nan=False),
        )
    )
    return AlleleVector(make_locus(k), raw / raw.sum())


@st.composite
def background_with_gpms(draw, n_gpms=1, min_k=2, max_k=6):
    """(b, [GPMs...]) sharing one locus; matrices may have zero cells."""
    b = draw(backgrounds(min_k=min_k, max_k=max_k))
    k = b.locus.k
    gpms = []
    for _ in range(n_gpms):
        raw = draw(
            npst.arrays(
                np.float64,
                (k, k),
                elements=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            )
        )
        mask = draw(npst.arrays(np.bool_, (k, k)))
        m = raw * mask
        m = (m + m.T) / 2.0
        if m.sum() == 0.0:
            m = np.zeros((k, k))
            m[0, 0] = 1.0
        gpms.append(GPM(b.locus, m / m.sum()))
    return (b, *gpms)
