"""Two-term semiclassical trace and counting asymptotics for 2D magnetic
Dirichlet operators, with exact-spectrum verification on model domains."""
from .asymptotics import (ConvergenceReport, KunzShift, convergence_study, counting_prediction,
                          counting_vs_exact, kunz_shift, mehler_heat_kernel, predict_trace,
                          semiclassical_trace_exact, thermo_density)
from .coeff import (SeriesTolerance, bulk_density_term, landau_density, s_k_alt, s_k_direct,
                    s_series)
from .errors import (ConfigError, ConvergenceError, CutoffError, DomainError, GapConditionError,
                     MagtraceError, NumericError, PreconditionError)
from .geometry import (ConstantField, Disk, RadialBump, Rectangle, Star, c0, c1, field_range)
from .special1d import (ModelEigenpair, ModelGrid, hadamard_check, hermite_phi,
                        hermite_tail_mass, model_eigensystem)
from .spectral2d import (Spectrum, count_below, disk_spectrum, radial_channel,
                         rectangle_spectrum_fd, trace_f)
from .testfunctions import FermiDirac, Gaussian, LogPressure, SmoothedStep

__version__ = "0.1.0"
