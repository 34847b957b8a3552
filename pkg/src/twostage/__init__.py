"""Two-stage universal lossy coding and identification of parametric
stationary mixing sources."""

from .bitcode import (BitReader, BitString, TruncatedStreamError,
                      elias_decode, elias_encode)
from .distances import (DistanceEstimate, kl_gaussian_iid, smoothness_check,
                        variational_exact_1d, variational_mc)
from .ecvq import (Codebook, DistortionSpec, LagrangianReport, ecvq_design,
                   ecvq_encode, lagrangian_eval, rho_n)
from .mde import (CandidateSet, VcBoundReport, YatracosSet, mde_estimate,
                  set_probability, u_statistic, vc_bound, vc_deviation_bound,
                  yatracos_member)
from .models import (GaussianAR, GaussianIID, HiddenMarkov,
                     InvalidParameterError, SampleBlock, SourceFamily,
                     log_density, make_family, mixing_bound, sample_path)
from .scheme import (Database, EncodedBlock, MalformedStreamError,
                     MemoryLayout, SchemeConfig, decode_block, delta_schedule,
                     encode_block, identify_report, memory_layout,
                     waiting_time)

__version__ = "0.1.0"
