"""rareval: a harness for measuring what review text contributes to rating
prediction, under removal, reduction, distortion, sparsity, and cold-start
conditions, against pluggable predictors."""

__version__ = "0.1.0"
