"""Invertible marginal flows, RealNVP coupling layers and their compositions."""

from .elementary import (
    ElementaryFlow, ArcsinhFlow, LogFlow, ExpFlow, LinearFlow, SinhArcsinhFlow,
    BoxCoxFlow, TanhFlow, SalFlow, SumOfTanhFlow, SumOfLogExpFlow,
    FLOW_KINDS, make_elementary_flow, solve_monotone,
)
from .coupling import CouplingLayer
from .stack import (
    FlowStack, flow_forward, flow_inverse, flow_log_det_jacobian,
    flow_forward_and_log_det, build_flow_stack,
)

__all__ = [
    'ElementaryFlow', 'ArcsinhFlow', 'LogFlow', 'ExpFlow', 'LinearFlow', 'SinhArcsinhFlow',
    'BoxCoxFlow', 'TanhFlow', 'SalFlow', 'SumOfTanhFlow', 'SumOfLogExpFlow',
    'FLOW_KINDS', 'make_elementary_flow', 'solve_monotone',
    'CouplingLayer',
    'FlowStack', 'flow_forward', 'flow_inverse', 'flow_log_det_jacobian',
    'flow_forward_and_log_det', 'build_flow_stack',
]
