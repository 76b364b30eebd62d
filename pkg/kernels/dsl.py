"""
Kernel Expression Language
==========================
Text form of kernel expressions, so models are configuration files (`.kdsl`).

Grammar:
    expr   := ident '(' [arg (',' arg)*] ')'
    arg    := expr | number | string
    string := JSON string literal (dataset and landmark paths)

`#` starts a comment running to the end of the line. Node names:

    gauss(s, sigma[, dim])            multiscale(s, sigma, levels[, dim])
    sum(k, ...)                       product(k, k, ...)
    scale(c, k)                       diag(a11, ..., add, scalar)
    anisotropic(r11..r33, s1, s2, s3, k)
    localize(w, k)                    spatially_varying(region(w, k), ...)
    empirical("set.json")             posterior(k, "ref.csv", "target.csv", noise)
    ones([dim])                       zero([dim])
  scalar kernels:  sgauss(sigma)  sconst(c)
  weights:         wconst(c)  step(nx, ny, nz, offset)  sigmoid(nx, ny, nz, offset, width)
                   bump(cx, cy, cz, radius)  oneminus(w)

Parameters are validated while parsing, so range errors carry the position of
the offending call.
"""

import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from errors import (
    ArityError,
    FileFormatError,
    KernelSyntaxError,
    ParameterError,
    UnknownIdentifierError,
)
from .base import (
    MatrixKernel,
    ScalarConstant,
    ScalarGaussian,
    ScalarKernel,
    _partition_check_points,
    anisotropic,
    diag,
    gauss,
    kernel_product,
    kernel_sum,
    localize,
    multiscale,
    ones,
    scale,
    spatially_varying,
    zero,
)
from .datasets import DeformationFieldSet, EmpiricalKernel, load_deformation_set
from .expr import KernelExpr, call
from .weights import (
    BumpWeight,
    ConstantWeight,
    OneMinusWeight,
    SigmoidWeight,
    StepWeight,
    WeightFunction,
)

logger = logging.getLogger("GPMorph.Kernels")

PathLike = Union[str, Path]


# ========================================
# Tokenizer
# ========================================

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str       # number | ident | string | ( | ) | , | eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            raise KernelSyntaxError(f"unexpected character {text[pos]!r}", line, column)
        kind = match.lastgroup
        lexeme = match.group()
        if kind == "punct":
            tokens.append(Token(lexeme, lexeme, line, column))
        elif kind in ("number", "ident", "string"):
            tokens.append(Token(kind, lexeme, line, column))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rfind("\n") + 1
        pos = match.end()
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


# ========================================
# Node signatures
# ========================================

KERNEL, SCALAR, WEIGHT, REGION, NUMBER, STRING = "kernel", "scalar", "weight", "region", "number", "string"


@dataclass(frozen=True)
class _Parsed:
    expr: Union[KernelExpr, float, str]
    kind: str
    dim: int = 3    # output dimension of kernel nodes


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.index = 0

    def peek(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, kind: str, what: str) -> Token:
        token = self.peek()
        if token.kind != kind:
            found = "end of input" if token.kind == "eof" else repr(token.text)
            raise KernelSyntaxError(f"expected {what}, found {found}", token.line, token.column)
        return self.advance()

    def parse(self) -> KernelExpr:
        node = self.parse_arg()
        end = self.peek()
        if end.kind != "eof":
            raise KernelSyntaxError(f"unexpected {end.text!r} after expression", end.line, end.column)
        if node.kind != KERNEL:
            first = self.tokens[0]
            raise ParameterError(f"top-level expression must be a kernel, got a {node.kind}",
                                 first.line, first.column)
        return node.expr

    def parse_arg(self) -> _Parsed:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise KernelSyntaxError(f"number out of range: {token.text}", token.line, token.column)
            return _Parsed(value, NUMBER)
        if token.kind == "string":
            self.advance()
            try:
                return _Parsed(json.loads(token.text), STRING)
            except json.JSONDecodeError as e:
                raise KernelSyntaxError(f"bad string literal: {e.msg}", token.line, token.column)
        if token.kind == "ident":
            return self.parse_call()
        found = "end of input" if token.kind == "eof" else repr(token.text)
        raise KernelSyntaxError(f"expected an expression, found {found}", token.line, token.column)

    def parse_call(self) -> _Parsed:
        name_token = self.advance()
        name = name_token.text
        if name not in _NODES:
            raise UnknownIdentifierError(f"unknown identifier {name!r}", name_token.line, name_token.column)
        self.expect("(", f"'(' after {name}")
        args: List[_Parsed] = []
        if self.peek().kind != ")":
            args.append(self.parse_arg())
            while self.peek().kind == ",":
                self.advance()
                args.append(self.parse_arg())
        self.expect(")", "',' or ')'")
        try:
            return _NODES[name](name, args)
        except _NodeError as e:
            raise e.error_type(str(e), name_token.line, name_token.column) from None


class _NodeError(Exception):
    def __init__(self, message: str, error_type=ParameterError):
        super().__init__(message)
        self.error_type = error_type


def _arity(name: str, args, low: int, high: Optional[int] = None) -> None:
    high = low if high is None else high
    if not low <= len(args) <= (high if high >= 0 else len(args)):
        if high == low:
            expected = f"{low}"
        elif high < 0:
            expected = f"at least {low}"
        else:
            expected = f"{low} to {high}"
        raise _NodeError(f"{name} takes {expected} arguments, got {len(args)}", ArityError)


def _kinds(name: str, args, kinds) -> None:
    for position, (arg, kind) in enumerate(zip(args, kinds), start=1):
        if arg.kind != kind:
            raise _NodeError(f"argument {position} of {name} must be a {kind}, got a {arg.kind}")


def _positive(name: str, what: str, value: float) -> None:
    if not value > 0:
        raise _NodeError(f"{name}: {what} must be positive, got {value:g}")


def _dim_arg(name: str, args, position: int) -> int:
    if len(args) <= position:
        return 3
    value = args[position].expr
    if value != int(value) or value < 1:
        raise _NodeError(f"{name}: dimension must be a positive integer, got {value:g}")
    return int(value)


def _same_dims(name: str, args) -> int:
    dims = {a.dim for a in args}
    if len(dims) != 1:
        raise _NodeError(f"{name}: operands have different output dimensions {sorted(dims)}")
    return dims.pop()


def _values(args) -> List:
    return [a.expr for a in args]


def _node_gauss(name, args):
    _arity(name, args, 2, 3)
    _kinds(name, args, [NUMBER] * 3)
    _positive(name, "variance scale s", args[0].expr)
    _positive(name, "bandwidth sigma", args[1].expr)
    return _Parsed(call(name, *_values(args)), KERNEL, _dim_arg(name, args, 2))


def _node_multiscale(name, args):
    _arity(name, args, 3, 4)
    _kinds(name, args, [NUMBER] * 4)
    _positive(name, "variance scale s", args[0].expr)
    _positive(name, "bandwidth sigma", args[1].expr)
    levels = args[2].expr
    if levels != int(levels) or levels < 1:
        raise _NodeError(f"{name}: levels must be a positive integer, got {levels:g}")
    return _Parsed(call(name, *_values(args)), KERNEL, _dim_arg(name, args, 3))


def _node_sum(name, args):
    _arity(name, args, 1, -1)
    _kinds(name, args, [KERNEL] * len(args))
    return _Parsed(call(name, *_values(args)), KERNEL, _same_dims(name, args))


def _node_product(name, args):
    _arity(name, args, 2, -1)
    _kinds(name, args, [KERNEL] * len(args))
    return _Parsed(call(name, *_values(args)), KERNEL, _same_dims(name, args))


def _node_scale(name, args):
    _arity(name, args, 2)
    _kinds(name, args, [NUMBER, KERNEL])
    _positive(name, "factor c", args[0].expr)
    return _Parsed(call(name, *_values(args)), KERNEL, args[1].dim)


def _node_diag(name, args):
    if len(args) < 2:
        raise _NodeError(f"{name} takes d*d matrix entries and a scalar kernel, got {len(args)} arguments",
                         ArityError)
    count = len(args) - 1
    d = math.isqrt(count)
    if d * d != count:
        raise _NodeError(f"{name}: {count} matrix entries do not form a square matrix", ArityError)
    _kinds(name, args, [NUMBER] * count + [SCALAR])
    A = np.array(_values(args[:-1])).reshape(d, d)
    magnitude = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > 1e-12 * magnitude:
        raise _NodeError(f"{name}: matrix A must be symmetric")
    if np.min(np.linalg.eigvalsh(A)) < -1e-12 * magnitude:
        raise _NodeError(f"{name}: matrix A must be positive semi-definite")
    return _Parsed(call(name, *_values(args)), KERNEL, d)


def _node_anisotropic(name, args):
    _arity(name, args, 13)
    _kinds(name, args, [NUMBER] * 12 + [KERNEL])
    if args[12].dim != 3:
        raise _NodeError(f"{name}: inner kernel must have output dimension 3")
    R = np.array(_values(args[:9])).reshape(3, 3)
    if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-8:
        raise _NodeError(f"{name}: R must be orthonormal")
    for value in _values(args[9:12]):
        _positive(name, "scale entries of S", value)
    return _Parsed(call(name, *_values(args)), KERNEL, 3)


def _node_localize(name, args):
    _arity(name, args, 2)
    _kinds(name, args, [WEIGHT, KERNEL])
    return _Parsed(call(name, *_values(args)), KERNEL, args[1].dim)


def _node_region(name, args):
    _arity(name, args, 2)
    _kinds(name, args, [WEIGHT, KERNEL])
    return _Parsed(call(name, *_values(args)), REGION, args[1].dim)


def _node_spatially_varying(name, args):
    _arity(name, args, 1, -1)
    _kinds(name, args, [REGION] * len(args))
    dim = _same_dims(name, args)
    points = _partition_check_points(3)
    total = sum(build_weight(a.expr.args[0])(points) for a in args)
    if np.max(np.abs(total - 1.0)) > 1e-6:
        raise _NodeError(f"{name}: region weights do not form a partition of unity")
    return _Parsed(call(name, *_values(args)), KERNEL, dim)


def _node_empirical(name, args):
    _arity(name, args, 1)
    _kinds(name, args, [STRING])
    if not args[0].expr:
        raise _NodeError(f"{name}: dataset path is empty")
    return _Parsed(call(name, *_values(args)), KERNEL, 3)


def _node_posterior(name, args):
    _arity(name, args, 4)
    _kinds(name, args, [KERNEL, STRING, STRING, NUMBER])
    if args[3].expr < 0:
        raise _NodeError(f"{name}: noise variance must be non-negative, got {args[3].expr:g}")
    return _Parsed(call(name, *_values(args)), KERNEL, args[0].dim)


def _node_constant(name, args):
    _arity(name, args, 0, 1)
    _kinds(name, args, [NUMBER])
    return _Parsed(call(name, *_values(args)), KERNEL, _dim_arg(name, args, 0))


def _node_scalar(name, args):
    _arity(name, args, 1)
    _kinds(name, args, [NUMBER])
    _positive(name, "parameter", args[0].expr)
    return _Parsed(call(name, *_values(args)), SCALAR)


def _node_weight(arity: int, check: Optional[Callable] = None):
    def node(name, args):
        _arity(name, args, arity)
        _kinds(name, args, [NUMBER] * arity)
        if check is not None:
            check(name, _values(args))
        return _Parsed(call(name, *_values(args)), WEIGHT)
    return node


def _check_normal(name, values):
    if not any(values[:3]):
        raise _NodeError(f"{name}: normal must be nonzero")


def _check_sigmoid(name, values):
    _check_normal(name, values)
    _positive(name, "width", values[4])


def _check_bump(name, values):
    _positive(name, "radius", values[3])


def _node_oneminus(name, args):
    _arity(name, args, 1)
    _kinds(name, args, [WEIGHT])
    return _Parsed(call(name, args[0].expr), WEIGHT)


_NODES: Dict[str, Callable] = {
    "gauss": _node_gauss,
    "multiscale": _node_multiscale,
    "sum": _node_sum,
    "product": _node_product,
    "scale": _node_scale,
    "diag": _node_diag,
    "anisotropic": _node_anisotropic,
    "localize": _node_localize,
    "spatially_varying": _node_spatially_varying,
    "region": _node_region,
    "empirical": _node_empirical,
    "posterior": _node_posterior,
    "ones": _node_constant,
    "zero": _node_constant,
    "sgauss": _node_scalar,
    "sconst": _node_scalar,
    "wconst": _node_weight(1),
    "step": _node_weight(4, _check_normal),
    "sigmoid": _node_weight(5, _check_sigmoid),
    "bump": _node_weight(4, _check_bump),
    "oneminus": _node_oneminus,
}


def parse_kernel(text: str) -> KernelExpr:
    """
    Parse kernel DSL text into an expression tree.

    Raises:
        KernelSyntaxError: malformed text (with line and column).
        UnknownIdentifierError / ArityError / ParameterError: invalid calls.
    """
    return _Parser(text).parse()


# ========================================
# Pretty-printer
# ========================================

def format_number(value: float) -> str:
    """Integral values print without a fraction; others use the shortest exact repr."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def format_kernel(expr: Union[KernelExpr, float, str]) -> str:
    """Canonical text of an expression: `name(arg, arg)` with single spaces after commas."""
    if isinstance(expr, KernelExpr):
        return f"{expr.name}({', '.join(format_kernel(a) for a in expr.args)})"
    if isinstance(expr, str):
        return json.dumps(expr)
    return format_number(expr)


# ========================================
# Builder
# ========================================

def build_weight(expr: KernelExpr) -> WeightFunction:
    args = expr.args
    if expr.name == "wconst":
        return ConstantWeight(args[0])
    if expr.name == "step":
        return StepWeight(args[:3], args[3])
    if expr.name == "sigmoid":
        return SigmoidWeight(args[:3], args[3], args[4])
    if expr.name == "bump":
        return BumpWeight(args[:3], args[3])
    if expr.name == "oneminus":
        return OneMinusWeight(build_weight(args[0]))
    raise UnknownIdentifierError(f"{expr.name!r} is not a weight function")


def _build_scalar(expr: KernelExpr) -> ScalarKernel:
    if expr.name == "sgauss":
        return ScalarGaussian(expr.args[0])
    if expr.name == "sconst":
        return ScalarConstant(expr.args[0])
    raise UnknownIdentifierError(f"{expr.name!r} is not a scalar kernel")


class _Builder:
    def __init__(self, base_dir: Path):
        self.base_dir = base_dir
        self._datasets: Dict[Path, DeformationFieldSet] = {}

    def resolve(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else (self.base_dir / path).resolve()

    def dataset(self, name: str) -> DeformationFieldSet:
        path = self.resolve(name)
        if path not in self._datasets:
            self._datasets[path] = load_deformation_set(path)
        return self._datasets[path]

    def build(self, expr: KernelExpr) -> MatrixKernel:
        name, args = expr.name, expr.args
        if name == "gauss":
            return gauss(args[0], args[1], int(args[2]) if len(args) > 2 else 3)
        if name == "multiscale":
            return multiscale(args[0], args[1], int(args[2]), int(args[3]) if len(args) > 3 else 3)
        if name == "sum":
            return kernel_sum(*(self.build(a) for a in args))
        if name == "product":
            return kernel_product(*(self.build(a) for a in args))
        if name == "scale":
            return scale(args[0], self.build(args[1]))
        if name == "diag":
            d = math.isqrt(len(args) - 1)
            return diag(np.array(args[:-1]).reshape(d, d), _build_scalar(args[-1]))
        if name == "anisotropic":
            return anisotropic(np.array(args[:9]).reshape(3, 3), np.array(args[9:12]), self.build(args[12]))
        if name == "localize":
            return localize(build_weight(args[0]), self.build(args[1]))
        if name == "spatially_varying":
            return spatially_varying([(build_weight(r.args[0]), self.build(r.args[1])) for r in args])
        if name == "empirical":
            return EmpiricalKernel(self.dataset(args[0]))
        if name == "posterior":
            return self.posterior(args)
        if name == "ones":
            return ones(int(args[0]) if args else 3)
        if name == "zero":
            return zero(int(args[0]) if args else 3)
        raise UnknownIdentifierError(f"{name!r} is not a matrix kernel")

    def posterior(self, args) -> MatrixKernel:
        # regression depends on kernels; import here to keep the package graph acyclic
        from geometry import read_landmarks
        from regression import observations_from_landmarks, posterior_full

        inner = self.build(args[0])
        ref_path, target_path = self.resolve(args[1]), self.resolve(args[2])
        observations = observations_from_landmarks(
            read_landmarks(ref_path), read_landmarks(target_path), args[3]
        )
        _, kernel = posterior_full(inner.mean(), inner, observations,
                                   sources=(str(ref_path), str(target_path)))
        return kernel


def build_kernel(expr: KernelExpr, base_dir: Optional[PathLike] = None) -> MatrixKernel:
    """
    Build a kernel from an expression tree.

    Relative dataset and landmark paths resolve against `base_dir` (default:
    the current directory); the built kernel reports absolute paths in `expr`.
    """
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    return _Builder(base.resolve()).build(expr)


def kernel_from_text(text: str, base_dir: Optional[PathLike] = None) -> MatrixKernel:
    return build_kernel(parse_kernel(text), base_dir)


def load_kernel(path: PathLike) -> MatrixKernel:
    """Read, parse and build a `.kdsl` file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileFormatError(f"cannot read kernel file {path}: {e}") from e
    kernel = build_kernel(parse_kernel(text), path.parent)
    logger.info(f"Loaded kernel from {path}: {format_kernel(kernel.expr)}")
    return kernel
