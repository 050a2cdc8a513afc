# The exchange model shared by every computational route: states, jumps, kernels and transition tables.
# Import the pywex.model module to use it!

# ======================
# IMPORTS
# ======================
# This means that the routes can import those types easily, for example this works:
#   from pywex.model import WealthState, ConstantKernel
from .problem import Problem, ProblemSeverity, ProblemSet, ProblemCode
from .errors import (PywexError, InvalidKernelError, UnderflowError, StateError, StateSpaceTooLargeError,
                     CflError, GridError, UnsupportedDimensionError, DegenerateTimeError, NonviableFormError,
                     DomainError, TimeMatchError, EmptyEnsembleError, ConfigError)
from .state import (WealthState, JumpVector, StateKind, StateClass, apply_jump, total_wealth, classify_state,
                    corner_index, to_units)
from .kernel import (RateKernel, ConstantKernel, TableKernel, FunctionKernel, KappaForm, KernelPreset,
                     builtin_kernels, parse_kernel, load_table)
from .transitions import TransitionTable, TransitionEntry, build_transition_table

from . import problem, errors, state, kernel, transitions
