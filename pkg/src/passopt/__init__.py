"""Joint transmit and pinching beamforming for waveguide-fed antenna arrays."""

from .scenario import (Placement, Scenario, TransmitBeam, Violation,
                       check_feasibility, dbm_to_watts, make_scenario)
from .channel import (EffectiveChannel, RateReport, effective_channel,
                      guided_response, sinr_and_rate, sum_rate, user_channel)
from .wmmse import (WmmseState, build_wmmse_state, mse, optimal_equalizer,
                    optimal_weight, wmmse_objective)
from .mmpdd import SolveResult, SolverConfig, solve
from .kktdual import (KktParams, decode_raw_params, dual_search,
                      normalize_power, project_spacings, project_x_end,
                      reconstruct_beam)
from .baselines import fd_wmmse, grid_oracle, uniform_pass

__all__ = [
    "Placement", "Scenario", "TransmitBeam", "Violation", "check_feasibility",
    "dbm_to_watts", "make_scenario", "EffectiveChannel", "RateReport",
    "effective_channel", "guided_response", "sinr_and_rate", "sum_rate",
    "user_channel", "WmmseState", "build_wmmse_state", "mse",
    "optimal_equalizer", "optimal_weight", "wmmse_objective", "SolveResult",
    "SolverConfig", "solve", "KktParams", "decode_raw_params", "dual_search",
    "normalize_power", "project_spacings", "project_x_end", "reconstruct_beam",
    "fd_wmmse", "grid_oracle", "uniform_pass",
]
