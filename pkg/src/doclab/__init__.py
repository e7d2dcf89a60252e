"""Monte-Carlo estimation of the density of classifiers and its generalization bounds."""

__version__ = "0.1.0"
