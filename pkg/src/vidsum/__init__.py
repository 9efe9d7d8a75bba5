"""Video summarization: quality filtering, group-lasso segmentation, tree ranking, knapsack selection."""

__version__ = "0.1.0"
