"""
    Dense tanh network u(x, t) over a flat parameter vector.

    Input derivatives come from forward tangents: every layer carries the value stream and, on
    request, the x-, t- and xx-streams

        a   = tanh(z)
        a_x = s1 * z_x,   a_t = s1 * z_t,   a_xx = s2 * z_x**2 + s1 * z_xx

    with s1 = 1 - a**2 and s2 = -2 a s1. The streams are graph nodes over the parameter leaf, so
    any loss built from them can be differentiated w.r.t. the parameters in one reverse pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from pypinnkf.autodiff.graph import Node, constant, leaf
from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_Derivative
from pypinnkf.core.structures import (
    FloatArray, GraphConstructionError, NetworkArchitecture, NonFiniteError, PhysicsParameter,
)
from pypinnkf.core.utilities import as_points

ALL_DERIVATIVES = frozenset(E_Derivative)

ParameterVector = FloatArray


def init_parameters(arch: NetworkArchitecture, seed: int, physics: PhysicsParameter | None = None) -> ParameterVector:
    """
    Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases. A physics slot is drawn
    uniformly from the coefficient's initial range and stored in raw space.
    """
    rng = np.random.default_rng(seed)
    params = np.zeros(arch.n_params, dtype=np.float64)

    for w_slice, _, (fan_in, fan_out) in arch.layer_slices():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[w_slice] = rng.uniform(-limit, limit, size=fan_in * fan_out)

    if arch.physics_slots:
        if physics is None:
            raise ValueError("Architecture has a physics slot but no PhysicsParameter was given")
        lo, hi = physics.init_range
        value = rng.uniform(lo, hi)
        clip = const.PHYSICS_INIT_CLIP
        upper = 1.0 - clip if physics.constraint == "sigmoid" else np.inf
        value = float(np.clip(value, clip, upper))
        params[arch.physics_index] = float(physics.unconstrain(value))

    return params


def _check_finite(node: Node | None, layer: int) -> None:
    if node is not None and not np.all(np.isfinite(node.value)):
        raise NonFiniteError(layer)


def forward_streams(theta: Node, arch: NetworkArchitecture, points: FloatArray,
                    order: Iterable[E_Derivative] = ALL_DERIVATIVES) -> dict[E_Derivative, Node]:
    """
    Build the requested output streams for an (n, 2) point array. Returned nodes have shape (n,).
    """
    order = frozenset(order)
    if theta.value.shape != (arch.n_params,):
        raise GraphConstructionError(f"Parameter vector of length {theta.value.size} does not match {arch.n_params}")
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"Points must have shape (n, 2), got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise NonFiniteError(0, "Non-finite input point")

    want_x = E_Derivative.U_X in order or E_Derivative.U_XX in order
    want_t = E_Derivative.U_T in order
    want_xx = E_Derivative.U_XX in order

    layers = arch.layer_slices()
    X = constant(points)

    # first affine map: z = X W + b; the tangent seeds (1, 0) and (0, 1) pick rows of W
    w_slice, b_slice, shape = layers[0]
    W = theta[w_slice].reshape(shape)
    z = X @ W + theta[b_slice]
    z_x = W[0:1, :] if want_x else None
    z_t = W[1:2, :] if want_t else None
    z_xx = None
    _check_finite(z, 1)

    for i, (w_slice, b_slice, shape) in enumerate(layers[1:], start=2):
        a = z.tanh()
        s1 = 1.0 - a.square()
        a_x = s1 * z_x if want_x else None
        a_t = s1 * z_t if want_t else None
        a_xx = None
        if want_xx:
            s2 = -2.0 * a * s1
            a_xx = s2 * z_x.square()
            if z_xx is not None:
                a_xx = a_xx + s1 * z_xx

        W = theta[w_slice].reshape(shape)
        z = a @ W + theta[b_slice]
        z_x = a_x @ W if a_x is not None else None
        z_t = a_t @ W if a_t is not None else None
        z_xx = a_xx @ W if a_xx is not None else None
        for stream in (z, z_x, z_t, z_xx):
            _check_finite(stream, i)

    n = points.shape[0]
    out = {E_Derivative.U: z.reshape(n)}
    if E_Derivative.U_X in order:
        out[E_Derivative.U_X] = z_x.reshape(n)
    if want_t:
        out[E_Derivative.U_T] = z_t.reshape(n)
    if want_xx:
        out[E_Derivative.U_XX] = z_xx.reshape(n)
    return out


def physics_node(theta: Node, arch: NetworkArchitecture, physics: PhysicsParameter) -> Node | float:
    """Constrained physics coefficient: a graph node when trainable, the model value otherwise."""
    if not (physics.trainable and arch.physics_slots):
        return float(physics.model_value)
    idx = arch.physics_index
    raw = theta[idx:idx + 1]
    if physics.constraint == "softplus":
        return raw.softplus()
    if physics.constraint == "sigmoid":
        return raw.sigmoid()
    raise ValueError(f"Unsupported constraint '{physics.constraint}'")


def physics_value(params: ParameterVector, arch: NetworkArchitecture, physics: PhysicsParameter) -> float:
    if not (physics.trainable and arch.physics_slots):
        return float(physics.model_value)
    return float(physics.constrain(params[arch.physics_index]))


@dataclass
class EvaluationBundle:
    """
        Network output and input derivatives at a batch of points, as graph nodes over `theta`.
        Parameter gradients are computed on first request and cached.
    """
    theta: Node
    fields: dict[E_Derivative, Node]
    _gradients: dict[tuple[E_Derivative, int | None], FloatArray] = field(default_factory=dict, repr=False)

    def node(self, which: E_Derivative) -> Node:
        try:
            return self.fields[which]
        except KeyError:
            raise KeyError(f"{which.value} was not requested from evaluate()") from None

    @property
    def u(self) -> FloatArray:
        return self.node(E_Derivative.U).value

    @property
    def u_t(self) -> FloatArray:
        return self.node(E_Derivative.U_T).value

    @property
    def u_x(self) -> FloatArray:
        return self.node(E_Derivative.U_X).value

    @property
    def u_xx(self) -> FloatArray:
        return self.node(E_Derivative.U_XX).value

    def param_gradient(self, which: E_Derivative, index: int | None = None) -> FloatArray:
        """
        d(field)/d(theta). With `index` the gradient of that point's value (length n_params);
        without it the (n_points, n_params) Jacobian.
        """
        key = (which, index)
        if key not in self._gradients:
            node = self.node(which)
            if index is not None:
                self._gradients[key] = _gradient_of(node[index], self.theta)
            else:
                rows = [_gradient_of(node[i], self.theta) for i in range(node.value.shape[0])]
                self._gradients[key] = np.vstack(rows) if rows else np.zeros((0, self.theta.value.size))
        return self._gradients[key]


def _gradient_of(scalar: Node, theta: Node) -> FloatArray:
    theta.grad = None
    scalar.backward()
    if theta.grad is None:
        return np.zeros_like(theta.value)
    return theta.grad.copy()


def evaluate(params: ParameterVector, arch: NetworkArchitecture, x, t,
             order: Iterable[E_Derivative] = ALL_DERIVATIVES) -> EvaluationBundle:
    """Evaluate the network and the requested input derivatives at (x, t) (scalars or arrays)."""
    theta = leaf(params, name="theta")
    return EvaluationBundle(theta=theta, fields=forward_streams(theta, arch, as_points(x, t), order))


def predict(params: ParameterVector, arch: NetworkArchitecture, points: FloatArray) -> FloatArray:
    """Plain forward pass without a graph; same arithmetic as the value stream of `forward_streams`."""
    a = np.asarray(points, dtype=np.float64)
    layers = arch.layer_slices()
    for i, (w_slice, b_slice, shape) in enumerate(layers):
        z = a @ params[w_slice].reshape(shape) + params[b_slice]
        if not np.all(np.isfinite(z)):
            raise NonFiniteError(i + 1)
        a = np.tanh(z) if i < len(layers) - 1 else z
    return a.reshape(-1)


class NetworkField:
    """The network at a parameter leaf, viewed as a field u(x, t)."""

    def __init__(self, theta: Node, arch: NetworkArchitecture):
        self.theta = theta
        self.arch = arch

    def bundle(self, points: FloatArray, order: Iterable[E_Derivative] = ALL_DERIVATIVES) -> EvaluationBundle:
        return EvaluationBundle(theta=self.theta, fields=forward_streams(self.theta, self.arch, points, order))

    def __call__(self, points: FloatArray) -> FloatArray:
        return predict(self.theta.value, self.arch, points)


class AnalyticField:
    """
        Closed-form field with hand-coded derivatives; each callable maps (x, t) arrays to u-values.
        Streams are constants, so losses built on it have no parameter dependence.
    """

    def __init__(self, u: Callable, u_t: Callable | None = None, u_x: Callable | None = None,
                 u_xx: Callable | None = None):
        self._fns = {E_Derivative.U: u, E_Derivative.U_T: u_t, E_Derivative.U_X: u_x, E_Derivative.U_XX: u_xx}
        self.theta = leaf(np.zeros(0), name="theta")

    def bundle(self, points: FloatArray, order: Iterable[E_Derivative] = ALL_DERIVATIVES) -> EvaluationBundle:
        x, t = points[:, 0], points[:, 1]
        fields = {}
        for which in set(order) | {E_Derivative.U}:
            fn = self._fns[which]
            if fn is None:
                raise KeyError(f"Analytic field has no {which.value}")
            fields[which] = constant(np.broadcast_to(fn(x, t), x.shape).astype(np.float64))
        return EvaluationBundle(theta=self.theta, fields=fields)

    def __call__(self, points: FloatArray) -> FloatArray:
        return np.asarray(self._fns[E_Derivative.U](points[:, 0], points[:, 1]), dtype=np.float64)


def value_and_grad(params: ParameterVector, loss: Callable[[Node], Node]) -> tuple[float, FloatArray]:
    """
    `loss` receives the parameter leaf and returns a scalar node. Returns (loss value, gradient).
    """
    theta = leaf(params, name="theta")
    out = loss(theta)
    if not isinstance(out, Node):
        raise GraphConstructionError(f"Loss must return a graph node, got {type(out).__name__}")
    if out.value.size != 1:
        raise GraphConstructionError(f"Loss must be scalar, got shape {out.shape}")
    out.backward()
    grad = theta.grad.copy() if theta.grad is not None else np.zeros_like(theta.value)
    return float(out.value.reshape(())), grad


def grad_loss(params: ParameterVector, arch: NetworkArchitecture, loss: Callable[[Node], Node]) -> FloatArray:
    """Exact reverse-mode gradient of a scalar loss built from `forward_streams` of the given parameter leaf."""
    if np.asarray(params).shape != (arch.n_params,):
        raise GraphConstructionError(f"Parameter vector of length {np.asarray(params).size} does not match {arch.n_params}")
    return value_and_grad(params, loss)[1]
