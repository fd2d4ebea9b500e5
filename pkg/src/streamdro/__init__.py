"""Streaming Wasserstein DRO with clustered (compressed) reference measures."""
from .clustering import (ClusteringConfig, OnlineClustering, Reclustering, SupCover, greedy_k_centers,
                         kmeans, make_clusterer)
from .distributions import (ClusteredDistribution, ClusterStat, EmpiricalDistribution, empirical_mean,
                            incorporate_point)
from .dro import (AffinePiece, AmbiguitySpec, BranchAndBoundConfig, DecisionSpec, SolveReport,
                  build_reformulation, solve_compressed_dro, solve_full_dro, solve_saa)
from .radius import RadiusSchedule, radius_at
from .stream import ProblemSpec, StreamPolicy, elbow_select_K, run_stream
from .support import SupportSet

__all__ = [
    "AffinePiece", "AmbiguitySpec", "BranchAndBoundConfig", "ClusterStat", "ClusteredDistribution",
    "ClusteringConfig", "DecisionSpec", "EmpiricalDistribution", "OnlineClustering", "ProblemSpec",
    "RadiusSchedule", "Reclustering", "SolveReport", "StreamPolicy", "SupCover", "SupportSet",
    "build_reformulation", "elbow_select_K", "empirical_mean", "greedy_k_centers", "incorporate_point",
    "kmeans", "make_clusterer", "radius_at", "run_stream", "solve_compressed_dro", "solve_full_dro",
    "solve_saa",
]
