"""Downlink multi-user MIMO / power-domain NOMA simulator and
power-allocation toolbox."""

from .sysmodel import (SystemConfig, UserDrop, beta_from_distance_km,
                       calibrated_p_max, draw_user_drop, pathloss_db,
                       received_snr_db)
from .channel import (ChannelMatrix, correlation, gen_nlos, los_channel_matrix,
                      los_distance, los_steering, nlos_distance)
from .training import (EstimateSet, PilotPlan, despread, estimate_channels,
                       gamma_factor, make_pilot_plan, mmse_estimate,
                       overhead_factor)
from .beamrate import (Beamformer, RateReport, SingularBasisError,
                       beamformer_for_scheme, effective_gain_stats, rate_los,
                       rate_mmimo_nlos_lb, rate_noma_nlos_ub, sic_condition,
                       sinr_instantaneous, zf_beamformer, zf_effective_gains)
from .powerops import (MaxMinSolution, PowerAllocation, SinrContext,
                       crossover_antennas, instantaneous_context,
                       los_sumrate_alloc, maxmin_solve, mmimo_nlos_context,
                       noma_nlos_context, noma_sumrate_alloc,
                       two_user_max_rates, two_user_zf_powers, waterfill)
from .pairing import (InfeasibleBasisError, Pairing, canonical_pairing,
                      default_partition, hmnoma_partition, pair_los, pair_nlos)
from .harness import (ExperimentSpec, ResultTable, build_experiment,
                      crossover_probability, emit, experiment_ids,
                      run_experiment)

__version__ = "0.1.0"
