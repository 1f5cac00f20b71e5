"""Hierarchical placement delivery arrays and two-layer coded caching with security and privacy."""

from .field import FieldCtx, matrix_rank, sample_vec_with_sum
from .pda import Pda, PdaParams, mn_pda, partition_pda, pda_loads, verify_pda
from .hpda import Hpda, grouping_hpda, hpda_stats, hybrid_hpda, verify_hpda
from .scheme import Delivery, DemandMatrix, Library, Mode, Randomness, SchemeInstance
from .sim import AuditSpec, AuditTarget, mi_audit, run_session, measure_loads

__version__ = "0.1.0"
