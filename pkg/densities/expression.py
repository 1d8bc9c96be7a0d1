"""
Small arithmetic expression language over point coordinates, compiled to torch callables.

Grammar: numbers, coordinates x1..xd, binary + - * /, unary -, parentheses and the
functions tanh(e) and expclip(e) = exp(min(e, 0)).
"""
import ast
from typing import Callable

import torch

from utils import DTYPE

_FUNCTIONS = {
    "tanh": torch.tanh,
    "expclip": lambda t: torch.exp(torch.clamp(t, max=0.0)),
}

_BINARY = {
    ast.Add: torch.add,
    ast.Sub: torch.sub,
    ast.Mult: torch.mul,
    ast.Div: torch.div,
}


def _compile(node, dim):
    if isinstance(node, ast.Expression):
        return _compile(node.body, dim)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda x: torch.full(x.shape[:-1], value, dtype=DTYPE)
    if isinstance(node, ast.Name):
        name = node.id
        if name.startswith("x") and name[1:].isdigit():
            i = int(name[1:])
            if not 1 <= i <= dim:
                raise ValueError(f"coordinate {name} out of range for dimension {dim}")
            return lambda x: x[..., i - 1]
        raise ValueError(f"unknown name {name!r} in expression")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, dim)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        op = _BINARY[type(node.op)]
        left, right = _compile(node.left, dim), _compile(node.right, dim)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS:
        if len(node.args) != 1 or node.keywords:
            raise ValueError(f"{node.func.id} takes exactly one argument")
        fn = _FUNCTIONS[node.func.id]
        arg = _compile(node.args[0], dim)
        return lambda x: fn(arg(x))
    raise ValueError(f"unsupported expression element: {ast.dump(node)}")


def compile_expression(text: str, dim: int) -> Callable[[torch.Tensor], torch.Tensor]:
    """Compile `text` into a function mapping points (..., dim) to values (...)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ValueError(f"cannot parse expression {text!r}: {e.msg}") from e
    return _compile(tree, dim)
