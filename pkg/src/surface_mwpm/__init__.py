"""Minimum-weight perfect matching decoder for the planar surface code.

Public entry points:

* :func:`decode_2d` for perfect-measurement syndromes,
* :class:`StreamingDecoder` for round-by-round decoding with measurement errors,
* :func:`mwpm` and :func:`brute_force_mwpm` for the matching problem itself,
* :func:`run_point`, :func:`run_sweep` and :func:`estimate_threshold` for
  logical error rate estimation.
"""

from .blossom import DualCertificate, Journal, Matcher, MatchingResult, mwpm, verify_certificate
from .decoder import Correction, check_logical_failure, correction_from_matching, decode_2d
from .errors import (ExpandNonzeroY, ExpandOuter, FutureDataNeeded, GraphInfeasible, InvalidMark,
                     NoCrossing, NonEmptySyndrome, NoProgress, NotSameTree, OutOfOrderRound,
                     SurfaceMatchingError, SyndromeParseError, TooLarge)
from .lattice import (ErrorState, LatticeConfig, Mode, NoiseParams, NoisyMemory, RoundRecord, Syndrome,
                      apply_bit_flips, logical_x_parity, measure_z_stabilizers, sample_record)
from .montecarlo import (FixedFailures, FixedTrials, SweepSpec, ThresholdEstimate, TrialStats,
                         estimate_threshold, run_point, run_sweep, wilson_interval)
from .oracle import brute_force_mwpm
from .streaming import (LazyMatcher, StreamingDecoder, decode_record_batch, decode_record_streaming,
                        match_space_time)
from .syndrome_graph import (Boundary, DetectionHistory, Pruning, ShadowClass, SyndromeGraph, build_graph,
                             explore_region, manhattan_weight, nearest_boundary, parse_syndrome_text,
                             shadow_classify)

__version__ = "0.1.0"
