from .checkpoint import load_model, load_params, save_model, save_params
from .clrnet import (
    ClrnetArch,
    ClrnetParams,
    ForwardTape,
    backward,
    clrnet_forward,
    conv_forward,
    init_params,
    lstm_step,
    mse_loss,
)
from .gradcheck import gradient_check
from .model import ClrnetModel, Normalization
from .optim import OptimizerState, optimizer_step
