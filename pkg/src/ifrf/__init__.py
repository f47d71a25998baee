"""Intuitionistic fuzzy decision trees (IFDT) and random forests (IFRF)."""

from .data import Dataset, FeatureSchema, inject_label_noise, load_csv, stratified_kfold
from .discretizer import build_partitions, fuzzify_dataset, kmeans_1d, membership_vector
from .evaluation import Hyperparameters, HyperparameterGrid, cross_validate, grid_search, nested_cross_validate
from .forest import IfrfForest, fit_forest, predict, train_forest, vote_scheme1, vote_scheme2
from .ifs import IfsElement, hamming_distance, ifs_entropy, make_element, non_membership_from
from .stats import AccuracyMatrix, friedman_test, holm_adjust, pairwise_friedman
from .tree import IfdtTree, build_tree, classify_sample, igain

__version__ = "0.1.0"
