from .checkpoint import load_checkpoint, save_checkpoint
from .models import HAN, HGT, GraphTensors, HGTLayer, build_model, han_forward, hgt_forward, loss_and_grad
from .ops import segment_softmax, segment_sum

__all__ = [
    "HAN", "HGT", "HGTLayer", "GraphTensors", "build_model", "han_forward", "hgt_forward", "loss_and_grad",
    "segment_softmax", "segment_sum", "save_checkpoint", "load_checkpoint",
]
