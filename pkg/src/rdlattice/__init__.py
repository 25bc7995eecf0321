"""Rate-distortion tools: Shannon lower bounds, finite-blocklength bounds and
lattice quantizers.  All information quantities are in nats unless a function
says otherwise."""

__version__ = "0.1.0"

from .distortion import DistortionMeasure, evaluate  # noqa: E402
from .sources import ContinuousSource, FiniteSource  # noqa: E402
from .rdfinite import blahut_arimoto, critical_distortion  # noqa: E402
from .lattice import make_lattice, nearest_point, scale_to_distortion  # noqa: E402

__all__ = ["__version__", "DistortionMeasure", "evaluate", "ContinuousSource", "FiniteSource",
           "blahut_arimoto", "critical_distortion", "make_lattice", "nearest_point",
           "scale_to_distortion"]
