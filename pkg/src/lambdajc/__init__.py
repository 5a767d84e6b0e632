"""Lambda-type three-level atom in a two-mode cavity with deformed cross-Kerr medium.

Closed-form amplitudes per Fock block, atom-field entanglement entropy and
mode-1 entropy squeezing.
"""

__version__ = "0.1.0"

from .errors import (ComplexRootsError, ConfigError, DegenerateRootsError, DomainError,
                     LambdaJCError, MissingFrequenciesError, NonHermitianError,
                     StepSizeError, UnknownPresetError, ValidationFailure)
from .model import (CoherentModeSpec, FockGrid, NonlinearitySpec, SystemParams,
                    choose_truncation, coherent_amplitudes, coupling_strength,
                    deformed_kerr_shift, detunings, eval_nonlinearity)
from .dynamics import (AmplitudeTriple, BlockCouplings, BlockSet, BlockSolution,
                       CubicSolution, StateSnapshot, amplitudes_at, assemble_state,
                       block_couplings, cubic_coefficients, initial_weights,
                       ode_oracle_block, prepare_blocks, solve_block, solve_cubic_trig)
from .entanglement import (EigenTriple, ReducedAtomDM, hermitian3_eigs_bisection,
                           hermitian3_eigs_cardano, reduced_atom_dm, von_neumann_entropy)
from .squeezing import (QuadratureGrid, SqueezingSample, momentum_distribution,
                        oscillator_eigenfunction, position_distribution, shannon_entropy,
                        squeezing_indicators)
