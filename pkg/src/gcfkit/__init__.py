"""gcfkit: design and verification of fixed-point generalized comb decimators."""

from .errors import (
    InternalError,
    OverlappingBandsError,
    ParameterError,
    StageOverflowError,
)
from .filters import (
    CascadeCoefficients,
    CombSpec,
    GcfSpec,
    NormalizationGain,
    PolyphaseBank,
    comb_coefficients,
    compute_alpha,
    expand_full_polynomial,
    normalization_gain,
    polyphase_decompose,
    polyphase_impulse,
    stage_coefficients,
)
from .spectral import (
    FoldingBandSet,
    ResponseGrid,
    comb_response,
    folding_bands,
    gcf_response,
    grid_frequencies,
    response_grid,
    worst_case_attenuation,
)
from .wordlength import (
    ErrorStats,
    FixedPointFormat,
    FractionalBitsResult,
    IntegerSizing,
    SensitivityResult,
    ToleranceSpec,
    WordLengthReport,
    cascade_derivative_magnitudes,
    design_wordlengths,
    fractional_bits,
    integer_bits,
    monte_carlo_coverage,
    monte_carlo_error_std,
    quantization_error_response,
    quantize_coefficients,
    quantized_response,
    sensitivity,
    y_from_p,
)
from .sdsim import (
    ModulatorResult,
    SdConfig,
    SimulationRun,
    decimate_fixed_point,
    export_run,
    generate_bandlimited_signal,
    run_experiment,
    sd_modulate,
    welch_psd,
)

__version__ = "0.1.0"
