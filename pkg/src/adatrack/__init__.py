"""Correlation-filter visual tracking with attribute-driven selection of
pre-trained CNN feature layers."""

from .afdt import FeatureFrame, LayerRecord, read_feature_file, write_feature_file
from .config import TrackerConfig
from .dcf import (FilterModel, GaussianLabel, ResponseMap, SampleMemory,
                  SpatialRegularizer, detect, make_gaussian_label,
                  make_spatial_regularizer, update_memory)
from .dictionaries import (ATTRIBUTES, MODEL_CATALOG, MODELS, AttributeVector,
                           DictionaryCatalog, DictionaryTable, LayerConfig,
                           channel_count, load_dictionaries, score_configs,
                           select_config)
from .evaluation import (OPEReport, OPEResult, center_error, evaluate_boxes,
                         iou, precision_curve, run_ope, success_curve,
                         write_report)
from .features import (FeatureStack, builtin_extract, fourier_resize,
                       resample_to_common_grid, stack_from_frame)
from .solvers import (AdmmInfo, BacfConfig, CgInfo, CgSettings, bacf_objective,
                      eco_objective, train_bacf, train_eco)
from .tracker import SequenceSpec, TrackerState, init, run_sequence, step

__version__ = "0.1.0"
