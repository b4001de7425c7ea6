from .functional import (
    MessageState,
    edgeconv_forward,
    forward_graph,
    gcn_forward,
    message_pass,
    readout_predict,
    sage_forward,
)
from .layers import LAYER_TYPES, GraphBatch, batch_graphs, make_batch
from .metrics import Metrics, auc_macro_ovr, binary_auc, confusion_matrix, metrics_from_probs
from .model import GnnConfig, GnnLayer, GnnModel
from .train import TrainResult, evaluate, train_classifier
