"""Full-range dispersion-encoded ISAM reconstruction.

Real-valued spectral-domain OCT measurements lose the sign of the optical
delay, so objects on both sides of zero delay fold onto each other. A
deliberate dispersion mismatch blurs the folded (mirror) copy, which lets
sparse recovery tell the two apart. This package provides the ISAM forward
model with its NUFFT-based adjoint, dispersion encoding and autofocus, the
greedy DEFR baseline, a FISTA model-based solver, pseudo-full-range test-data
synthesis, image-quality metrics and a command-line front end.
"""

__version__ = "0.1.0"

from .data_model import (  # noqa: E402
    ComplexSpectra,
    DispersionModel,
    GridSpec,
    RealSpectra,
    SusceptibilityImage,
    WeightVector,
    as_array,
    make_grid,
)
from .defr import defr_image, defr_isam, defr_solve  # noqa: E402
from .dispersion import (  # noqa: E402
    apply_phase,
    autofocus,
    dispersion_phase,
    encode_real,
)
from .estimators import (  # noqa: E402
    DefrIsamReconstructor,
    DefrReconstructor,
    DispersionAutofocus,
    IfftReconstructor,
    IsamReconstructor,
    MbirReconstructor,
)
from .isam import (  # noqa: E402
    ifft_reconstruct,
    isam_reconstruct,
    k_adjoint,
    k_forward,
    khat_adjoint,
    khat_forward,
    plan_nufft,
)
from .mbir import MbirConfig, depth_weights, mbir_solve, soft_threshold  # noqa: E402
from .metrics import evaluate, log_scale_16bit, psnr, rmse, ssim  # noqa: E402
from .synthesis import (  # noqa: E402
    PhantomSpec,
    Scenario,
    build_scenario,
    hilbert_positive_delay,
    phantom_image,
    simulate_measurement,
    synthesize_fullrange,
)
