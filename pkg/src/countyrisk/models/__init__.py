from .ensemble import ForestModel, ForestParams, GbmModel, GbmParams, fit_forest, fit_gbm, fit_tree
from .linear import LinearModel, fit_linear
from .matrix import DesignMatrix, split_indices, train_test_split
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .tree import Tree, grow_tree

LEARNERS = ("rf", "gbm", "lr")


def predict(model, x):
    """Predictions of any fitted model; a single p-vector gives a length-1 array."""
    return model.predict(x)


__all__ = [
    "DesignMatrix",
    "ForestModel",
    "ForestParams",
    "GbmModel",
    "GbmParams",
    "LEARNERS",
    "LinearModel",
    "Tree",
    "fit_forest",
    "fit_gbm",
    "fit_linear",
    "fit_tree",
    "grow_tree",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "save_model",
    "split_indices",
    "train_test_split",
]
