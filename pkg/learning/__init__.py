"""Learning package initialization"""

from learning.lstm import LstmParams, backward, forward, init_params, loss_bce
from learning.optim import adam_step
from learning.gradcheck import grad_check
from learning.model_io import load_params, save_params
from learning.train import random_search, stratified_kfold, train_classifier, undersample
from learning.baselines import knn_classify, train_logreg

__all__ = [
    "LstmParams",
    "init_params",
    "forward",
    "loss_bce",
    "backward",
    "adam_step",
    "grad_check",
    "save_params",
    "load_params",
    "undersample",
    "stratified_kfold",
    "train_classifier",
    "random_search",
    "train_logreg",
    "knn_classify",
]
