"""QAOA for Exact Cover instances arising from airline Tail Assignment."""
from .instance import (ExactCoverInstance, GenerationError, InstanceError, ProblemGraph,
                       ValencyStats, generate_planted, load_instance, make_instance,
                       parse_instance, solution_indices, solve_exact, to_graph, valency_stats)
from .ising import IsingModel, build_ising, energy, penalty_energy, spectrum
from .simulator import (AnnealConfig, NoiseConfig, SimulationError, VariationalParams, anneal,
                        apply_cost_phase, apply_mixer, cost_histogram, expectation, prepare_plus,
                        run_noisy, run_qaoa, sample, success_probability)
from .optimizer import (LandscapeGrid, LevelResult, interp_pipeline, interp_start,
                        landscape_scan, multistart_optimize, nelder_mead)
from .analysis import (TtsReport, qaoa_total_time, required_measurements, tts_qa, tts_qaoa)

__version__ = "0.1.0"
