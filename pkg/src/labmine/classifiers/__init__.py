from .models import (
    ALGORITHMS,
    Model,
    ModelSpec,
    SchemaMismatch,
    canonical_algorithm,
    load_model,
    predict_proba,
    save_model,
    train,
)
from .smo import SmoState, smo_solve
from .tree import TreeNode, TreeParams, induce_c45, parse_tree, render_tree

__all__ = [
    "ALGORITHMS", "Model", "ModelSpec", "SchemaMismatch", "SmoState", "TreeNode", "TreeParams",
    "canonical_algorithm", "induce_c45", "load_model", "parse_tree", "predict_proba",
    "render_tree", "save_model", "smo_solve", "train",
]
