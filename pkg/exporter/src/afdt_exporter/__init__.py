"""Offline CNN activation exporter for AFDT feature files."""

from .export import ExportSpec, export
from .models import EXPECTED_SHAPES, MODELS, ExporterError, build_model, layer_mapping
from .writer import write_afdt

__version__ = "0.1.0"
