"""Coupled auto-encoder networks for cross-view recognition."""

from .cca import CcaModel, cca_embed, fit_cca
from .dataset import CorruptionSpec, DatasetError, ViewDataset, corrupt, generate_synthetic, load_dataset
from .evaluation import EvalReport, cross_view_eval, gap_ratio, neighbor_preservation, rank1
from .lbfgs import LbfgsConfig, OptimResult, minimize
from .objective import ObjectiveConfig, evaluate, grad_check
from .pairs import PairSets, build_diff_pairs, build_pair_sets, build_same_pairs, margin_terms
from .pca import PcaModel, fit_pca, project_2d, transform
from .trainer import NetworkModel, TrainConfig, embed, load_model, save_model, train

__version__ = "0.1.0"
