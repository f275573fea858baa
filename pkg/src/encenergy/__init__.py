"""Encoding-energy estimation for HEVC software encoders from bit-stream feature counts."""
from .catalog import FeatureCatalog, FeatureCategory, FeatureDef, Variant, build_catalog, selection_mask, validate_vector
from .dataset import Dataset, StreamMeta, StreamRecord, load_dataset, save_dataset
from .evaluation import EvaluationReport, cross_validate, evaluate, mean_abs_error, relative_error, render_report
from .fitting import build_design, fit, solve_bounded_ls
from .measurement import confidence_check, encoding_energy, integrate_power
from .models import FittedModel, ModelKind, predict_feature, predict_qp, predict_time, predict_uf
from .studentt import t_critical

__version__ = "0.1.0"
