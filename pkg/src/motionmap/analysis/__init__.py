from .importance import ImportanceReport, fit_output_tree, importance_report, top_k_features
from .pca import PcaModel, pca_fit, pca_inverse, pca_transform
from .tree import RegressionTree, TreeParams, fit_forest, fit_tree, forest_importance, mdi_importance

__all__ = [
    "ImportanceReport",
    "PcaModel",
    "RegressionTree",
    "TreeParams",
    "fit_forest",
    "fit_output_tree",
    "fit_tree",
    "forest_importance",
    "importance_report",
    "mdi_importance",
    "pca_fit",
    "pca_inverse",
    "pca_transform",
    "top_k_features",
]
