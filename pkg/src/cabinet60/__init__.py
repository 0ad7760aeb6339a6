"""Channel toolkit for short-range 60 GHz links inside metal enclosures.

Frequency-sweep sounding math, parameter extraction, statistical channel
synthesis and OFDM link analysis.
"""
from ._backend import BACKEND
from .dsp import (FrequencySweep, GeometryMismatchError, ImpulseResponse, SweepGeometry,
                  apply_window, average_sweeps, calibrated_cir, cfr_to_cir, cir_to_cfr,
                  gate_reference, inverse_filter, nmse_db, normalize_peak,
                  reference_correction, sweep_geometry, time_gate, window_coefficients)
from .extraction import (ArrivalFit, ConvergenceWarning, DecayFit, DistributionFit,
                         MultipathProfile, NonDecayingProfileError, PathLossFit,
                         captured_power_fraction, detect_paths, fit_arrivals,
                         fit_decay_constant, fit_distribution, fit_interarrivals,
                         fit_path_loss, measurement_distances, mixture_loglik,
                         rds_threshold_sweep, rms_delay_spread)
from .ofdm import (BerCurve, BerPoint, ChannelTooLongError, DesignEnvelope, OfdmConfig,
                   StopRule, antenna_gain, ber_awgn_bpsk, ber_rayleigh_bpsk, check_design,
                   cp_from_channel, doppler, es_n0_from_eb_n0, rate_and_latency,
                   simulate_ber)
from .synthesis import (ChannelModel, GaussianParams, MixtureArrivals, PRESET_NAMES,
                        Realization, SvModel, model_from_dict, normalize_unit_power, preset,
                        rayleigh_tdl, rng_stream, synthesize_cir, synthesize_sv_cir)

__version__ = "0.1.0"
