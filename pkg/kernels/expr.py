"""
Kernel expression trees.

A KernelExpr is the value-level description of how a kernel was built; every
kernel object reports one through its `expr` property, and the DSL parser
produces them from text.
"""

from dataclasses import dataclass
from typing import Tuple, Union


@dataclass(frozen=True)
class KernelExpr:
    """Call node `name(arg, ...)`; args are floats, strings (paths) or nested nodes."""
    name: str
    args: Tuple[Union[float, str, "KernelExpr"], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(
            a if isinstance(a, (str, KernelExpr)) else float(a) for a in self.args
        ))


def call(name: str, *args) -> KernelExpr:
    return KernelExpr(name, tuple(args))
