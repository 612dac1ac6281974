"""Interpolative-decomposition compression of snapshot matrices.

The core entry points are :func:`column_id`, :func:`sub_id` and :func:`spid`
for in-memory matrices, and :func:`run_pipeline` for streamed snapshots.
"""

from .archive import Archive, decode, decompress, encode, read_archive, write_archive
from .blocking import PartitionPlan, partition, stage1_compress, stage2_compress, two_stage_id
from .bounds import BoundReport, eps_tau, lemma_check, thm1_check, thm2_check
from .errors import CompressionError
from .grid import GridGeom, InterpOperator, SubsampleSpec, apply_interpolator, build_interpolator, subsample
from .idcore import IdFactors, SpidFactors, column_id, reconstruct, spid, sub_id
from .linalg import FixedRank, Tolerance, mgsqr, norms, spectral_norm, sym_eig_max, sym_eigh, sym_eigvals
from .metrics import QualityReport, compression_factor, quality_report, rel_frob_error
from .pipeline import PipelineResult, StreamConfig, overlap_report, run_pipeline, second_pass

__version__ = "0.1.0"
