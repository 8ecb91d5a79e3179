"""Economic complexity metrics for country-product trade data."""

from .data import (
    ExportMatrix,
    PanelObservation,
    TradeRecord,
    TradeTable,
    align_panel,
    build_export_matrix,
    nr_export_increase,
    parse_trade_csv,
)
from .econ import (
    RegressionResult,
    RegressionSpec,
    growth_regression,
    ols_fe,
    partial_correlation,
    pci_service_regression,
    standardized_coefficient,
)
from .fitness import FixedPointResult, fcm, mfcm, taylor_consistency
from .rca import IncidenceMatrix, RcaMatrix, binarize, concatenated_rca, incidence_from_bits, rca
from .reflections import SpectralResult, coupling_matrix, diversity, eci, mr_iterate, pci, ubiquity
from .scores import ScoreVector
from .stats import BoxStats, Ranking, box_stats, rank, spearman, yearly_rank_correlation

__version__ = "0.1.0"
