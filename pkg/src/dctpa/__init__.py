"""Two-photon absorption with broadband down-converted light: a stochastic spectral simulator."""
from .spectral import (ConfigError, FrequencyGrid, SpectralField, TemporalField, cross_spectrum,
                       make_grid, to_freq, to_time)
from .source import (DownConvertedPair, PumpSpec, SourceSpec, generate_ensemble, generate_pair,
                     sample_pump)
from .shaper import (Compose, Constant, Delay, Dispersion, PhaseMask, SquareWave, Tabulated,
                     apply_mask, square_wave_mask)
from .detector import TpaResult, TransitionSpec, delay_response, simulate, tpa_signal

__version__ = "0.1.0"
