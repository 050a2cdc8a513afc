# The four computational routes to the law of the chain:
# - chain: Monte Carlo sample paths and ensembles
# - master: exact evolution of the probability mass on the lattice
# - fokker_planck: continuum coefficients and finite-difference solvers
# - analytic: closed forms on the line and the triangle

from .chain import (Trajectory, TrajectoryEnsemble, EnsembleConfig, AbsorbedAt, HittingStats, CornerStats,
                    step, run_trajectory, run_ensemble, hitting_statistics, derive_seed, make_stream)
from .master import (StateSpace, ProbabilityField, enumerate_states, evolve_step, evolve, evolve_snapshots,
                     transition_matrix, absorption_probabilities, expected_absorption_steps, default_snapshots)
from .grid import DensityGrid, aggregate, edge_agents, edge_point, corner_point
from .fokker_planck import (Convention, FpeCoefficients, SolverConfig, coefficients, coefficients_from_rates,
                            constant_coefficients, reduce, line_diffusion, plane_diffusion, max_diffusion, solve_1d,
                            solve_2d)
from .analytic import (MixedDensity, Atom, AbsorptionSplit, EdgeSolution, BoundaryWeights, gaussian_1d,
                       absorption_split, image_solution_1d, gaussian_2d, boundary_weights, edge_solutions,
                       composite_solution_2d)

from . import chain, master, grid, fokker_planck, analytic
