"""Preferential attachment estimation from a single network snapshot."""

__version__ = "0.1.0"

from .net_core import (DataError, DegreeHistogram, EventSequence, GrowthTrace,  # noqa: E402
                       NumericError, ParseError, Snapshot, ingest_edge_list,
                       read_edge_list, tail_counts)
from .sg_sim import (Constant, Linear, LogDamped, PowerLaw, SGConfig,  # noqa: E402
                     Sequence, Tabulated, hat_p, simulate, simulate_replicates)
from .estimators import (AttachmentEstimate, BinningScheme, OneshotConfig,  # noqa: E402
                         estimate_baseline, estimate_existence_round,
                         estimate_mle_full, estimate_oneshot, estimate_oneshot_binned,
                         estimate_pt_window, log_likelihood)
from .model_fit import (FitResult, asymptotic_mu, asymptotic_pi, fit_alpha,  # noqa: E402
                        fit_beta, fit_gamma)
