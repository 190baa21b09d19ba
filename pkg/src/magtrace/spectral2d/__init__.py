"""Exact (to discretization error) Dirichlet spectra of magnetic Laplacians."""
from .lattice import fd_matrix, inertia_count, rectangle_spectrum_fd
from .radial import RadialChannel, channel_range, disk_spectrum, potential_minimum, radial_channel
from .spectrum import Spectrum, count_below, tail_bound, trace_f

__all__ = [
    "RadialChannel", "Spectrum", "channel_range", "count_below", "disk_spectrum",
    "fd_matrix", "inertia_count", "potential_minimum", "radial_channel",
    "rectangle_spectrum_fd", "tail_bound", "trace_f",
]
