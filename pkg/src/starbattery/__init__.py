"""Star-topology spin quantum battery simulator."""

__version__ = "0.1.0"

from .spin_core import (
    ConfigError,
    DensityMatrix,
    DimensionError,
    SectorState,
    SystemConfig,
    battery_reduced,
    collective_operators,
    dicke_multiplicity,
    reduced_state,
    thermal_state,
)
from .dynamics import PropagatorSpec, dephase, evolve_exact, evolve_full, u_xy_trotter
from .metrics import (
    AdvantageReport,
    advantage_report,
    battery_energy,
    ergotropy,
    ergotropy_ratio,
    passive_state,
)
from .correlations import correlation_trace, quantum_discord, two_spin_reduced, von_neumann_entropy
from .protocols import (
    asymptotic_charge,
    charge_sweep,
    fit_exponential,
    parallel_baseline,
    qcbl_run,
    relax_polarization,
)
