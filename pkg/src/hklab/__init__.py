"""Numerical laboratory for hyperkahler triples, ALG/ALH model ends and neck gluing."""

from .errors import ComputeError, ConfigError, HKLabError
from .forms import FormTriple, MetricQuaternion, flat_triple, gram, metric_from_triple, random_pullback, star_from_triple, wedge
from .models import ALGModel, ALHModel, FiberType, Lattice3

__version__ = "0.1.0"
