"""Group fairness of classifiers trained on data with generated missing values."""

__version__ = "0.1.0"
