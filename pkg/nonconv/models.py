"""
Shared enumerations for nonconv.
Process variants, function variants, path kinds, suites and provenance tags.
"""

import enum


# ============================================================
# ENUM DEFINITIONS
# ============================================================

class ModelKind(str, enum.Enum):
    FINITE_MARKOV = "finite_markov"
    IID = "iid"
    DYADIC_MAP = "dyadic_map"


class FunctionKind(str, enum.Enum):
    PRODUCT = "product"
    INDICATOR_PRODUCT = "indicator_product"
    POLYNOMIAL = "polynomial"
    DENSE_TABLE = "dense_table"


class PairLawForm(str, enum.Enum):
    TABLE = "table"
    PRODUCT = "product"
    DIAGONAL = "diagonal"


class PathKind(str, enum.Enum):
    XI = "xi"
    PSI = "psi"
    QN = "qn"
    LIL = "lil"
    Q = "q"


class Provenance(str, enum.Enum):
    EXACT_SERIES = "exact-series"
    EMPIRICAL = "empirical"


class NormalizationMode(str, enum.Enum):
    RAW = "raw"
    SELF = "self"


class Suite(str, enum.Enum):
    VARIANCE = "variance"
    COVARIANCE = "covariance"
    ASCLT = "asclt"
    ARCSINE = "arcsine"
    LIL = "lil"
    BLOCKS = "blocks"
    MIXING = "mixing"


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


class ClauseStatus(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
