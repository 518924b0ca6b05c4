"""Acoustic-emission crack-event classification.

Pipeline: sensor transfer-function removal and HHT denoising of multi-channel
recordings, four statistical event descriptors resampled to a common length,
and a stacked bidirectional LSTM classifier over tensile / shear / mixed-mode
crack classes, with a model-parameter sweep over input configurations.
"""

from .descriptors import (
    LAMBDA_ROWS,
    DescriptorConfig,
    DescriptorMatrix,
    DescriptorStandardizer,
    GammaExtractor,
    band_mean,
    build_gamma,
    instantaneous_frequency,
    matrices_to_array,
    resample_descriptor,
    slice_lambda,
    spectral_entropy,
    spectral_entropy_global,
    spectral_envelope,
    spectral_kurtosis,
    spectral_l2l1_norm,
    standardize,
)
from .emd import IMFSet, emd_decompose
from .errors import AECrackError
from .evaluate import (
    ConfusionMatrix,
    SweepCell,
    SweepResult,
    evaluate,
    run_cell,
    stratified_split,
    sweep,
)
from .nn import (
    BiLSTMClassifier,
    BiLSTMLayer,
    EarlyStopper,
    LSTMCellParams,
    ModelParams,
    TrainConfig,
    bilstm_forward,
    bptt_gradients,
    cross_entropy,
    init_model,
    lstm_forward,
    model_forward,
    predict,
    relu,
    sgdm_step,
    softmax,
    train,
)
from .preprocess import (
    EventPreprocessor,
    ProcessedEvent,
    RawEvent,
    TransducerModel,
    deconvolve_tfr,
    hht_denoise,
    select_max_energy_channel,
)
from .spectral import (
    AnalyticSignal,
    Spectrum,
    STFTGrid,
    TimeSeries,
    analytic_signal,
    power_spectrum,
    spectrum,
    stft,
)
from .synth import (
    CrackClass,
    LabeledDataset,
    LabeledEvent,
    SynthConfig,
    augment,
    generate_dataset,
    generate_event,
    iter_dataset,
)

__version__ = "0.1.0"
