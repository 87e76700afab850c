"""Simulation of interactive proofs for label-invariant distribution properties
under pair-conditional sampling access."""
from .distributions import (ApproxHistogram, Bucketing, Distribution, NeighborhoodSpec, approx_histogram,
                            bucket_of, emd_histograms, neighborhood, num_buckets, rl_distance, tv_distance)
from .errors import (DomainMismatch, InvalidParameter, MismatchedBucketing, ProtocolReject,
                     WeightMismatch)
from .oracles import FAIL, InstrumentedOracle, OracleStats, pcond_sim
from .outcomes import Outcome
from .profiles import PAPER, RELAXED_DEFAULT, CountRule, Profile, get_profile
from .rng import RngStream

__version__ = "0.1.0"
