"""County-level mortality modelling: spatial preprocessing, Gi* hotspots,
linear / random-forest / gradient-boosting regression and SHAP attributions."""

__version__ = "0.1.0"
