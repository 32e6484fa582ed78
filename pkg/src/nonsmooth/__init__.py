"""Exact additive-energy toolkit over finite abelian groups."""

from .errors import (
    BudgetExceededError,
    DenseCapError,
    GroupMismatchError,
    InfeasibleModelError,
    OverflowGuardError,
)
from .groups import (
    DualElement,
    GroupElement,
    GroupSet,
    GroupSpec,
    format_group,
    load_set,
    pairing,
    parse_group,
    save_set,
    span,
    symmetrize,
)
from .energy import (
    CountVector,
    HolderReport,
    SpectralEnergy,
    SpectrumTable,
    asym_energy,
    energy,
    energy_profile,
    holder_check,
    popularity,
    popularity_vector,
    rep_function,
    smoothing_exponent,
    spectrum,
    sum_count,
    sum_quadruples,
)
from .structure import (
    AdditiveStructure,
    build_structure,
    bucket_table,
    enforce_low_height,
    find_structure,
    pigeonhole_guarantee,
    validate_structure,
)
from .comity import (
    ComityCertificate,
    IncrementOutcome,
    SidewaysCertificate,
    comity_certificate,
    comity_increment,
    f_sets,
    overlap,
    sideways_certificate,
    sideways_increment,
    verify_comity,
    verify_sideways,
)
from .bsg import BsgCertificate, BsgParams, asym_bsg, quad_count, verify_bsg
from .models import ModelSpec, expected_exponents, gen, quotient_energies, random_subgroup
from .decompose import Block, Decomposition, decompose, extract_block, prune_popular, schedule

__version__ = "0.1.0"
