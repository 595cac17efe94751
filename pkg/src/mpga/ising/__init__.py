"""Two-dimensional Ising model: lattices, Metropolis dynamics, exact
enumeration, observables and MPGA-based thermalisation."""

from .exact import Thermo, enumerate_states, exact_thermo, thermo_from_states
from .lattice import (
    SpinLattice,
    crossover_spins,
    ising_energy,
    magnetization,
    mh_sweep,
    spin_crossover,
    sweep_batch,
    sweep_record,
)
from .mpga import IsingConfig, budget_sweep, mpga_mh_run, reference_thermo, thermo_series
from .observables import Observables, observables
