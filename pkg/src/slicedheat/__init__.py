"""Time-sliced path-integral approximation of heat semigroups with reflecting boundaries."""

__version__ = "0.1.0"

from .billiard import PathStatus, ReflectedPath, anti_development, billiard_flow, path_energy, trace_reflected
from .bundle import BoundaryOperator, BundleSpec, b_transport, transport_segment, validate_boundary_operator
from .geometry import Circle, Disk, FlatTorus, ImplicitPlanar, Interval, PhasePoint, Sphere
from .oracle import SpectralModel, fd_reference_evolve, image_kernel, spectral_evolve
from .sections import FieldSection, section_from_descriptor
from .semigroup import Partition, SliceEstimate, estimate_slice, generator_probe, quadrature_step_1d

__all__ = [
    "BoundaryOperator",
    "BundleSpec",
    "Circle",
    "Disk",
    "FieldSection",
    "FlatTorus",
    "ImplicitPlanar",
    "Interval",
    "Partition",
    "PathStatus",
    "PhasePoint",
    "ReflectedPath",
    "SliceEstimate",
    "SpectralModel",
    "Sphere",
    "anti_development",
    "b_transport",
    "billiard_flow",
    "estimate_slice",
    "fd_reference_evolve",
    "generator_probe",
    "image_kernel",
    "path_energy",
    "quadrature_step_1d",
    "section_from_descriptor",
    "spectral_evolve",
    "trace_reflected",
    "transport_segment",
    "validate_boundary_operator",
]
