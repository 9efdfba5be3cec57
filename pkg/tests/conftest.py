import pytest

from gpmkit import load_frequencies

ABC_TABLE = """locus,allele,frequency
L1,a,0.5
L1,b,0.3
L1,c,0.2
"""

STR_TABLE = """locus,allele,frequency
L1,8,0.1
L1,9,0.2
L1,10,0.3
L1,11,0.4
"""

DROPOUT_TABLE = """locus,allele,frequency
L1,A,0.1
L1,B,0.2
L1,C,0.7
"""


@pytest.fixture
def abc_b():
    """Three-allele locus (a, b, c) with frequencies (0.5, 0.3, 0.2)."""
    return load_frequencies(ABC_TABLE)["L1"]


@pytest.fixture
def str_b():
    """Four-allele STR locus (8, 9, 10, 11) with (0.1, 0.2, 0.3, 0.4)."""
    return load_frequencies(STR_TABLE)["L1"]


@pytest.fixture
def dropout_b():
    """Three-allele locus (A, B, C) with (0.1, 0.2, 0.7)."""
    return load_frequencies(DROPOUT_TABLE)["L1"]
