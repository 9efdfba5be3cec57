"""gpmkit: genotype probability matrices, kinship likelihood ratios, and
profile database search for uncertain DNA profiles."""

from .core import (
    FREQ_SUM_BAND,
    GPM,
    GPM_SUM_TOL,
    GPM_SYMMETRY_TOL,
    AlleleFreqVector,
    AlleleVector,
    Locus,
    background_gpm,
    extend_frequencies,
    genotype_probability,
    gpm_from_allele_vectors,
    gpm_from_genotype,
    iter_genotypes,
    load_frequencies,
    marginal_allele_vector,
    read_frequencies,
    validate,
)
from .errors import (
    DataValidationError,
    GpmError,
    InputParseError,
    NoSharedLociError,
    UndefinedLikelihoodError,
    UnknownAlleleError,
)
from .likelihood import (
    CoancestryParams,
    LocusLR,
    MultiLocusLR,
    conditional_gpm,
    lr_general,
    lr_related,
    lr_same,
    multi_locus_lr,
    sibling_lr_closed_form,
    subpop_correction,
)
from .notation import (
    AlleleDesignation,
    ContributorEncoding,
    ContributorTag,
    JointGenotypeTable,
    assemble_single,
    assemble_two_contributors,
    dropout_interpolation,
    joint_table,
    parse_designation,
)
from .relatives import (
    MutationMatrix,
    MutationModel,
    RelationshipKind,
    RelationshipSpec,
    build_mutation_matrix,
    parse_relationship,
    rel_d1,
    rel_dn,
    rel_sibling,
    rel_transform,
)
from .search import (
    CrossPair,
    ResolvedStore,
    SearchQuery,
    SearchReport,
    SearchResult,
    cross_search,
    search,
)
from .store import (
    CellEntry,
    Profile,
    ProfileStore,
    VectorEntry,
    format_profile,
    import_profiles,
    load_profiles_file,
    open_store,
    parse_profiles,
    profile_alleles,
    resolve_profile,
)

__version__ = "0.1.0"
