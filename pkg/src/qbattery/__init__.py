"""Numerical workbench for quantum batteries.

Passive states and ergotropy, entanglement-free work extraction,
speed-limited charging with collective advantage, and the Dicke and
spin-chain battery models.
"""

from importlib.metadata import PackageNotFoundError, version

from .charging import (AdvantageReport, ChargingProblem, advantage, charging_schedule, collective_driving,
                       feasibility_bound, full_charge_time, mixed_advantage_demo, parallel_driving, qsl_time,
                       separable_ball_member)
from .dicke import DickeConfig, charge_dicke, dicke_max_power, dicke_power_ratio, fit_exponent
from .ergotropy import (EnergySpectrum, activation_asymptote, activation_curve, entropy_matched_beta,
                        ergotropy_thermal_bound, gibbs_state, is_passive, passive_decomposition)
from .extraction import ExtractionPlan, build_plan, execute_plan, plan_for_copies, separability_certificate
from .qops import (ControlSchedule, DensityState, HermitianOperator, SimulationTrace, partial_trace,
                   partial_transpose, propagate, tensor, tensor_power)
from .spinchain import ChainConfig, chain_advantage, chain_hamiltonian, charge_chain, scaling_study

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [name for name in dir() if not name.startswith("_") and name not in ("version", "PackageNotFoundError")]
