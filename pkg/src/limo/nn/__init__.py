from .tensor import Parameter, Tensor, no_grad
from .gradcheck import GradCheckReport, grad_check
from .optim import AdamW
from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "Parameter",
    "Tensor",
    "no_grad",
    "GradCheckReport",
    "grad_check",
    "AdamW",
    "apply_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
