"""Hierarchical multi-orthogonal multiple access (MOMA) uplink simulator.

Spreading codes from one Walsh-Hadamard codebook are split between a
high-demand (HD) class that reuses codes round-robin and low-demand (LD)
classes that share a few codes through random combining matrices.  The
base station combines over ``M`` antennas and detects per user.
"""

__version__ = "0.1.0"

from .channel import PROFILES, ChannelRealization, TapDelayProfile, freq_autocorrelation, get_profile, sample_small_scale_channel
from .codes import (ClassCodePartition, CombiningMatrix, OrthogonalCodebook, SpreadingAssignment,
                    assign_codes, generate_hadamard, partition_codebook, sample_combining_matrix)
from .errors import *  # noqa: F401,F403
from .metrics import (SinrReport, asymptotic_sinr_ld, baseline_lora, baseline_narrowband, ld_capacity,
                      perfect_orthogonality_bound, rate, sinr_hd_sic, sinr_hd_su, sinr_ld)
from .phy import (MMSE, MRC, SIC, SU, combine, detect_hd_mmse_sic, detect_hd_su, detect_ld, spread,
                  superpose)
from .scenario import (HD, LD, ClassPlan, ClassSpec, SystemConfig, UserPopulation, build_population,
                       expected_gain_uniform, make_population, mean_gain, pathloss_db, pathloss_gain)
