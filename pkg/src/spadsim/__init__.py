"""Monte Carlo simulation of avalanche single-photon detectors feeding a
beam-splitter random bit generator."""

from .detector import (DEAD_TIME_PRESETS, ConstantDeadTime, DetectorParams, PulseKind,
                       PulseSource, PulseTrain, RateRampDeadTime, d0_params, d1_params,
                       effective_dead_time, expected_interval, generate_pulse_train,
                       next_pulse_interval, sample_intervals)
from .harness import (RunConfig, SweepReport, calibrate_input_rate, compare_to_reference,
                      preset_config, run_point, run_sweep)
from .reference import ReferenceTable, load_reference
from .resolver import BitStream, ResolverConfig, StreamingResolver, resolve_bits
from .sampling import RngState, derive_seed
from .stats import (AfterpulseFit, AutocorrResult, FitError, IntervalHistogram, fit_afterpulse,
                    interarrival_histogram, rms_error, serial_autocorrelation,
                    subtract_background)

__version__ = "0.1.0"
