from dataclasses import dataclass, field
from typing import Callable

import torch

from densities.expression import compile_expression
from utils import DTYPE, as_tensor

INTEGRAND_NAMES = ("constant", "coordinate", "halfspace_indicator", "tanh_linear", "expression")


@dataclass(frozen=True)
class Integrand:
    name: str
    params: dict
    fn: Callable[[torch.Tensor], torch.Tensor] = field(repr=False, compare=False)

    def __call__(self, x: torch.Tensor) -> torch.Tensor:
        return self.fn(x)

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}


def make_integrand(name: str, dim: int, **params) -> Integrand:
    """
    Build a named integrand on R^dim:
      constant(c), coordinate(index) = x_index (1-based), halfspace_indicator(a, b) = 1{a.x > b},
      tanh_linear(a, b) = tanh(a.x + b), expression(text).
    """
    if name == "constant":
        c = float(params.get("c", 1.0))
        fn = lambda x: torch.full(x.shape[:-1], c, dtype=DTYPE)
        params = {"c": c}
    elif name == "coordinate":
        index = int(params["index"])
        if not 1 <= index <= dim:
            raise ValueError(f"coordinate index must lie in 1..{dim}, got {index}")
        fn = lambda x: x[..., index - 1]
        params = {"index": index}
    elif name == "halfspace_indicator":
        a = as_tensor(params["a"], dim).reshape(-1)
        b = float(params.get("b", 0.0))
        fn = lambda x: ((x * a).sum(-1) > b).to(DTYPE)
        params = {"a": a.tolist(), "b": b}
    elif name == "tanh_linear":
        a = as_tensor(params["a"], dim).reshape(-1)
        b = float(params.get("b", 0.0))
        fn = lambda x: torch.tanh((x * a).sum(-1) + b)
        params = {"a": a.tolist(), "b": b}
    elif name == "expression":
        text = str(params["text"])
        fn = compile_expression(text, dim)
        params = {"text": text}
    else:
        raise ValueError(f"unknown integrand {name!r}, expected one of {', '.join(INTEGRAND_NAMES)}")
    return Integrand(name=name, params=params, fn=fn)


def integrand_from_dict(desc: dict, dim: int) -> Integrand:
    desc = dict(desc)
    if "name" not in desc:
        raise ValueError("integrand descriptor needs a 'name'")
    return make_integrand(desc.pop("name"), dim, **desc)
