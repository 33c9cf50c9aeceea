"""Pilot-limited wideband MIMO channel estimation via tensor completion.

Library layout:

* :mod:`tensorce.tensor_ops` — order-3 complex tensor algebra (unfoldings,
  mode products, truncated HOSVD, CP/Tucker reconstruction);
* :mod:`tensorce.channel` — specular multipath channel generator, pilot
  masks, noisy entry-wise observations;
* :mod:`tensorce.completion` — Tucker alternating-projection and CP
  weighted-ALS completion;
* :mod:`tensorce.baselines` — LS, per-fiber frequency LMMSE, joint SOMP;
* :mod:`tensorce.bench` — Monte Carlo experiment drivers, recovery
  thresholds, dataset export, result files;
* :mod:`tensorce.cten` — binary tensor file format shared with the neural
  residual stage;
* :mod:`tensorce.cli` — command-line front end.
"""

from .baselines import (AngularDictionary, FrequencyCovariance,
                        build_angular_dictionary,
                        estimate_frequency_covariance, lmmse_estimate,
                        ls_estimate, somp_estimate)
from .bench import (EstimatorSpec, ExperimentConfig, ExportConfig, RunRecord,
                    ThresholdRecord, dof_cp, dof_tucker, experiment1,
                    experiment2, experiment4, export_hybrid_dataset,
                    extract_threshold, nmse, nmse_db, read_results,
                    run_monte_carlo, write_results)
from .channel import (ChannelSpec, MultipathParams, Observation, PilotMask,
                      generate_channel, generate_mask, generate_rich_channel,
                      observe, steering_vector)
from .completion import (CPCompletionConfig, CPCompletionResult,
                         TuckerCompletionConfig, TuckerCompletionResult,
                         cp_wals_complete, observed_nmse, reimpose_pilots,
                         tucker_complete)
from .cten import read_cten, write_cten
from .seeding import derive_rng, derive_seed
from .tensor_ops import (CPModel, TuckerModel, cp_reconstruct, fold,
                         frobenius_norm, mode_product, truncated_hosvd,
                         tucker_reconstruct, unfold)

__version__ = "0.1.0"
