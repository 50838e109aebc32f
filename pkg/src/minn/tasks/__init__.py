from minn.tasks.functions import FUNCTIONS, ackley, ackley_grad, levy, levy_grad
from minn.tasks.mnist import (
    LabeledImage,
    MnistData,
    cross_entropy,
    encode_image,
    load_mnist,
)
from minn.tasks.sk import CostSample, SKInstance, sk_cost_from_record, sk_energy, sk_ground_state

__all__ = [
    "FUNCTIONS",
    "ackley",
    "ackley_grad",
    "levy",
    "levy_grad",
    "LabeledImage",
    "MnistData",
    "cross_entropy",
    "encode_image",
    "load_mnist",
    "CostSample",
    "SKInstance",
    "sk_cost_from_record",
    "sk_energy",
    "sk_ground_state",
]
