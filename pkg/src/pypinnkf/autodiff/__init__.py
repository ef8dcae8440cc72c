from .graph import Node, as_node, constant, custom, leaf, topological_order
from .network import (
    ALL_DERIVATIVES, AnalyticField, EvaluationBundle, NetworkField, ParameterVector, evaluate, forward_streams, grad_loss,
    init_parameters, physics_node, physics_value, predict, value_and_grad,
)

__all__ = ["Node", "as_node", "constant", "custom", "leaf", "topological_order",
           "ALL_DERIVATIVES", "AnalyticField", "EvaluationBundle", "NetworkField", "ParameterVector", "evaluate", "forward_streams", "grad_loss",
           "init_parameters", "physics_node", "physics_value", "predict", "value_and_grad"]
