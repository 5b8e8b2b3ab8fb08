"""Hybrid transceiver design for linear decentralized estimation in mmWave MIMO IoT networks.

A fusion center estimates a parameter vector from observations that the
nodes precode and send over a coherent multiple-access channel. The
package designs the node precoders and the fusion-center combiner
(fully digital or hybrid RF/baseband), with or without channel
estimation error, and scores them analytically and by Monte Carlo.
"""

from .bcd import (BcdTrace, DigitalTransceiver, NumericalConsistencyError, SingularSystemError,
                  bcd_design, mse_analytic, run_bcd, solve_dual, update_combiner, update_precoder)
from .bench import (ResultRow, Scenario, centralized_benchmark, monte_carlo_mse, run_scenario,
                    run_sweep, rows_to_csv)
from .channel import (ChannelRealization, ClusterSet, array_response, assemble_channel,
                      draw_clusters, perturb_csi)
from .config import ConfigError, load_scenario, parse_scenario
from .model import (BcdSettings, DimensionError, ObservationModel, SystemConfig,
                    make_observation_model, stack_model, transmit_power)
from .noiseless import RankDeficientError, noiseless_design, noiseless_mse
from .robust import RobustContext, agnostic_bcd_design, robust_bcd_design, robust_mse
from .somp import HybridTransceiver, hybrid_combiner, hybrid_precoder, hybridize, somp_factorize
from .validation import validate

__version__ = "0.1.0"
