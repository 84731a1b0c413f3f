"""Discursive voter model toolkit: rank-one scale-free graphs, exact voter and
coalescing-walk simulation, small-graph Markov-chain oracles, analytic
predictors and sweep orchestration."""
from ._backend import BACKEND
from .chain import GeneratorMatrix, build_dual_generator, build_vsrw_generator, relaxation_time
from .dynamics import RunRecord, VoterParams, WalkerSet, estimate_consensus_mc, simulate_voter
from .harness import ExperimentConfig, ScalingResult, fit_exponent, run_sweep
from .netgen import Graph, NetworkParams, Variant, generate
from .theory import predict_exponent, solve_rho

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "GeneratorMatrix", "build_dual_generator", "build_vsrw_generator",
    "relaxation_time", "RunRecord", "VoterParams", "WalkerSet", "estimate_consensus_mc",
    "simulate_voter", "ExperimentConfig", "ScalingResult", "fit_exponent", "run_sweep",
    "Graph", "NetworkParams", "Variant", "generate", "predict_exponent", "solve_rho",
]
