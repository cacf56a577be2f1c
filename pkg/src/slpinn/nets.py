"""Network evaluation with exact input derivatives and parameter gradients.

Two architectures are supported:

* a two-layer network  sum_j c_j * sigmoid(w_j . p + b_j)  evaluated with
  closed-form derivatives (the workhorse of the corrector-enriched scheme),
* a deeper baseline MLP evaluated by forward propagation of second-order
  jets (value + gradient + Hessian of the output w.r.t. the inputs), with
  parameter gradients obtained by reverse accumulation over that forward
  pass.

All derivatives are exact up to floating-point rounding; nothing here uses
finite differences.  Points are row vectors ordered (x, y[, t]).

Derivative quantities are keyed by index tuples into the input vector:
``()`` is the value, ``(i,)`` a first partial, ``(i, j)`` with i <= j a
second partial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatchError

__all__ = [
    "NetworkParams",
    "DerivativeBundle",
    "TwoLayerNet",
    "MlpNet",
    "make_network",
    "eval_network",
    "param_gradient_of_bundle",
    "init_params",
    "jet_keys",
]


def jet_keys(dim):
    """Derivative index tuples up to second order for `dim` inputs."""
    keys = [()]
    keys += [(i,) for i in range(dim)]
    keys += [(i, j) for i in range(dim) for j in range(i, dim)]
    return keys


def sigmoid_stack(z, order):
    """Logistic sigmoid and its derivatives up to `order` (max 3).

    expit evaluates the overflow-safe branchless form; the derivatives
    follow from the recurrences s' = s(1-s), s'' = s'(1-2s),
    s''' = s''(1-2s) - 2 s'^2.
    """
    out = np.empty(z.shape + (order + 1,))
    s = expit(z)
    out[..., 0] = s
    if order >= 1:
        s1 = s * (1.0 - s)
        out[..., 1] = s1
    if order >= 2:
        s2 = s1 * (1.0 - 2.0 * s)
        out[..., 2] = s2
    if order >= 3:
        out[..., 3] = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
    return out


@dataclass
class NetworkParams:
    """Flat parameter vector plus the architecture it belongs to.

    For the two-layer case (`layer_widths == [n]`) the layout follows the
    grouping (w_11..w_1n, w_21..w_2n, [w_31..w_3n,] b_1..b_n, c_1..c_n).
    For the baseline it is (W_1.ravel(), b_1, W_2.ravel(), b_2, ...,
    W_out.ravel(), b_out).
    """

    input_dim: int
    layer_widths: list
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if any(w < 1 for w in self.layer_widths):
            raise ValueError("layer widths must be >= 1")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("non-finite network parameters")
        expected = self.network().num_params
        if self.theta.size != expected:
            raise DimensionMismatchError(
                f"theta has {self.theta.size} entries, architecture needs {expected}")

    def network(self):
        if len(self.layer_widths) == 1:
            return TwoLayerNet(self.input_dim, self.layer_widths[0])
        return MlpNet(self.input_dim, self.layer_widths)


@dataclass
class DerivativeBundle:
    """Value, gradient and Hessian of a scalar field at one point."""

    value: float
    d1: np.ndarray
    d2: np.ndarray

    @classmethod
    def from_quantities(cls, q, dim):
        d1 = np.array([float(q[(i,)]) for i in range(dim)])
        d2 = np.zeros((dim, dim))
        for i in range(dim):
            for j in range(i, dim):
                d2[i, j] = d2[j, i] = float(q[(i, j)])
        return cls(float(q[()]), d1, d2)


def _check_points(pts, dim):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != dim:
        raise DimensionMismatchError(
            f"points have {pts.shape[1]} coordinates, expected {dim}")
    return pts


class TwoLayerNet:
    """c . sigmoid(W p + b) with analytic derivatives."""

    def __init__(self, input_dim, n):
        if n < 1:
            raise ValueError("need at least one neuron")
        self.input_dim = input_dim
        self.n = n
        self.num_params = n * (input_dim + 2)

    # theta layout helpers -------------------------------------------------
    def unpack(self, theta):
        d, n = self.input_dim, self.n
        W = theta[: d * n].reshape(d, n).T          # (n, d)
        b = theta[d * n: d * n + n]
        c = theta[d * n + n:]
        return W, b, c

    def pack(self, W, b, c):
        return np.concatenate([W.T.ravel(), b, c])

    def init_params(self, seed, input_scales=None):
        """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) draws; the input
        weights of dimension d are additionally divided by that input's
        half-range so elongated domains start in the sigmoids' active band."""
        rng = np.random.default_rng(seed)
        d, n = self.input_dim, self.n
        sw = 1.0 / np.sqrt(d)
        W = rng.uniform(-sw, sw, size=(n, d))
        if input_scales is not None:
            W /= np.asarray(input_scales, dtype=float)[None, :]
        b = rng.uniform(-sw, sw, size=n)
        c = rng.uniform(-1.0 / np.sqrt(n), 1.0 / np.sqrt(n), size=n)
        return NetworkParams(d, [n], self.pack(W, b, c))

    # evaluation ------------------------------------------------------------
    def context(self, theta, pts):
        """Shared per-(theta, points) state reused by values and gradients."""
        pts = _check_points(pts, self.input_dim)
        W, b, c = self.unpack(theta)
        Z = pts @ W.T + b
        S = sigmoid_stack(Z, 3)
        return {"W": W, "c": c, "S": S, "pts": pts}

    def quantities_ctx(self, ctx, which):
        W, c, S = ctx["W"], ctx["c"], ctx["S"]
        out = {}
        for key in which:
            if key == ():
                out[key] = S[..., 0] @ c
            elif len(key) == 1:
                out[key] = S[..., 1] @ (c * W[:, key[0]])
            else:
                a, bidx = key
                out[key] = S[..., 2] @ (c * W[:, a] * W[:, bidx])
        return out

    def quantities(self, theta, pts, which):
        return self.quantities_ctx(self.context(theta, pts), which)

    def param_jacobian(self, theta, pts, which):
        """Per-point gradients w.r.t. every parameter, one (N, P) block per key."""
        pts = _check_points(pts, self.input_dim)
        d, n = self.input_dim, self.n
        ctx = self.context(theta, pts)
        W, c, S = ctx["W"], ctx["c"], ctx["S"]
        N = pts.shape[0]
        out = {}
        for key in which:
            J = np.zeros((N, self.num_params))
            if key == ():
                base, nxt, scale = S[..., 0], S[..., 1], np.ones(n)
            elif len(key) == 1:
                base, nxt, scale = S[..., 1], S[..., 2], W[:, key[0]]
            else:
                base, nxt, scale = S[..., 2], S[..., 3], W[:, key[0]] * W[:, key[1]]
            # d/dc_j
            J[:, d * n + n:] = base * scale
            # d/db_j
            J[:, d * n: d * n + n] = nxt * (c * scale)
            # d/dW_jd: chain through z plus the explicit W factors
            for dd in range(d):
                col = nxt * (c * scale) * pts[:, dd:dd + 1]
                if len(key) == 1 and key[0] == dd:
                    col = col + S[..., 1] * c
                elif len(key) == 2:
                    a, bidx = key
                    if a == dd:
                        col = col + S[..., 2] * (c * W[:, bidx])
                    if bidx == dd:
                        col = col + S[..., 2] * (c * W[:, a])
                J[:, dd * n: (dd + 1) * n] = col
            out[key] = J
        return out

    def accumulate_ctx(self, ctx, alphas):
        """sum_i alpha[key][i] * d(quantity key at point i)/d(theta).

        The factored form avoids materializing per-point Jacobians; it is
        the primitive the training loop is built on.
        """
        d, n = self.input_dim, self.n
        W, c, S, pts = ctx["W"], ctx["c"], ctx["S"], ctx["pts"]
        gW = np.zeros((n, d))
        gb = np.zeros(n)
        gc = np.zeros(n)
        for key, alpha in alphas.items():
            alpha = np.asarray(alpha, dtype=float)
            if key == ():
                base, nxt, scale = S[..., 0], S[..., 1], np.ones(n)
            elif len(key) == 1:
                base, nxt, scale = S[..., 1], S[..., 2], W[:, key[0]]
            else:
                base, nxt, scale = S[..., 2], S[..., 3], W[:, key[0]] * W[:, key[1]]
            m0 = base.T @ alpha                       # (n,)
            m1 = nxt.T @ alpha
            mx = (nxt * alpha[:, None]).T @ pts       # (n, d)
            gc += scale * m0
            gb += c * scale * m1
            gW += (c * scale)[:, None] * mx
            if len(key) == 1:
                gW[:, key[0]] += c * (S[..., 1].T @ alpha)
            elif len(key) == 2:
                a, bidx = key
                m2 = S[..., 2].T @ alpha
                gW[:, a] += c * W[:, bidx] * m2
                gW[:, bidx] += c * W[:, a] * m2
        return self.pack(gW, gb, gc)

    def accumulate_param_gradient(self, theta, pts, alphas):
        return self.accumulate_ctx(self.context(theta, pts), alphas)


class MlpNet:
    """Multi-layer sigmoid MLP evaluated on second-order jets.

    The forward pass carries, for every neuron, the output value together
    with its first and second derivatives w.r.t. the network inputs.
    Parameter gradients run a reverse sweep over the stored jets, so they
    are exact for any jet component of the output.
    """

    def __init__(self, input_dim, widths):
        self.input_dim = input_dim
        self.widths = list(widths)
        self.keys = jet_keys(input_dim)
        self.K = len(self.keys)
        sizes = [input_dim] + self.widths + [1]
        self.shapes = [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]
        self.num_params = sum(r * c + r for r, c in self.shapes)

    def unpack(self, theta):
        layers = []
        ofs = 0
        for r, c in self.shapes:
            W = theta[ofs: ofs + r * c].reshape(r, c)
            ofs += r * c
            b = theta[ofs: ofs + r]
            ofs += r
            layers.append((W, b))
        return layers

    def init_params(self, seed, input_scales=None):
        rng = np.random.default_rng(seed)
        parts = []
        for li, (r, c) in enumerate(self.shapes):
            s = 1.0 / np.sqrt(c)
            W = rng.uniform(-s, s, size=(r, c))
            if li == 0 and input_scales is not None:
                W /= np.asarray(input_scales, dtype=float)[None, :]
            parts.append(W.ravel())
            parts.append(rng.uniform(-s, s, size=r))
        return NetworkParams(self.input_dim, self.widths, np.concatenate(parts))

    @property
    def _pair_index(self):
        second = [k for k in self.keys if len(k) == 2]
        pi = np.array([1 + i for i, _ in second])
        pj = np.array([1 + j for _, j in second])
        po = 1 + self.input_dim + np.arange(len(second))
        return pi, pj, po

    def _input_jet(self, pts):
        # jets live in (component, point, neuron) layout: GEMMs over the
        # last two axes stay contiguous and component gathers are axis-0
        N, d = pts.shape
        J = np.zeros((self.K, N, d))
        J[0] = pts
        for i in range(d):
            J[1 + i, :, i] = 1.0
        return J

    def _forward(self, theta, pts, keep=False):
        layers = self.unpack(theta)
        J = self._input_jet(pts)
        tape = []
        for li, (W, b) in enumerate(layers):
            Z = np.matmul(J, W.T)
            Z[0] += b
            if li == len(layers) - 1:
                if keep:
                    tape.append((J, None, None))
                J = Z
                break
            S = sigmoid_stack(Z[0], 3)
            A = self._jet_sigmoid(Z, S)
            if keep:
                tape.append((J, Z, S))
            J = A
        return J, tape, layers

    def _jet_sigmoid(self, Z, S):
        pi, pj, po = self._pair_index
        A = S[..., 1][None] * Z
        A[0] = S[..., 0]
        A[po] += S[..., 2][None] * Z[pi] * Z[pj]
        return A

    def context(self, theta, pts):
        pts = _check_points(pts, self.input_dim)
        J, tape, layers = self._forward(theta, pts, keep=True)
        return {"J": J, "tape": tape, "layers": layers, "pts": pts}

    def quantities_ctx(self, ctx, which):
        idx = {k: i for i, k in enumerate(self.keys)}
        return {key: ctx["J"][idx[key], :, 0].copy() for key in which}

    def quantities(self, theta, pts, which):
        pts = _check_points(pts, self.input_dim)
        J, _, _ = self._forward(theta, pts)
        idx = {k: i for i, k in enumerate(self.keys)}
        return {key: J[idx[key], :, 0].copy() for key in which}

    def _reverse(self, out_cot, tape, layers):
        """Backpropagate a cotangent on the output jet to parameter space."""
        d = self.input_dim
        pi, pj, po = self._pair_index
        gparts = [None] * len(layers)
        cot = out_cot
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            J_prev, Z, S = tape[li]
            K, n, w = cot.shape
            v = J_prev.shape[2]
            gW = cot.reshape(K * n, w).T @ J_prev.reshape(K * n, v)
            gb = cot[0].sum(axis=0)
            gparts[li] = (gW, gb)
            if li == 0:
                break
            cot = np.matmul(cot, W)
            # pull the cotangent back through the sigmoid jet of layer li-1
            _, Z, S = tape[li - 1]
            s1, s2, s3 = S[..., 1], S[..., 2], S[..., 3]
            zc = cot * s1[None]
            zc[0] += s2 * np.sum(cot[1:1 + d] * Z[1:1 + d], axis=0)
            csec = cot[po]
            zc[0] += np.sum(csec * (s3[None] * Z[pi] * Z[pj] + s2[None] * Z[po]),
                            axis=0)
            bump = csec * s2[None]
            for k in range(len(po)):
                zc[pi[k]] += bump[k] * Z[pj[k]]
                zc[pj[k]] += bump[k] * Z[pi[k]]
            cot = zc
        return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in gparts])

    def accumulate_ctx(self, ctx, alphas):
        idx = {k: i for i, k in enumerate(self.keys)}
        pts = ctx["pts"]
        cot = np.zeros((self.K, pts.shape[0], 1))
        for key, alpha in alphas.items():
            cot[idx[key], :, 0] += np.asarray(alpha, dtype=float)
        return self._reverse(cot, ctx["tape"], ctx["layers"])

    def accumulate_param_gradient(self, theta, pts, alphas):
        return self.accumulate_ctx(self.context(theta, pts), alphas)

    def param_jacobian(self, theta, pts, which):
        pts = _check_points(pts, self.input_dim)
        N = pts.shape[0]
        out = {key: np.zeros((N, self.num_params)) for key in which}
        idx = {k: j for j, k in enumerate(self.keys)}
        for i in range(N):
            row = pts[i: i + 1]
            _, tape, layers = self._forward(theta, row, keep=True)
            for key in which:
                cot = np.zeros((self.K, 1, 1))
                cot[idx[key], 0, 0] = 1.0
                out[key][i] = self._reverse(cot, tape, layers)
        return out


def make_network(input_dim, layer_widths):
    if len(layer_widths) == 1:
        return TwoLayerNet(input_dim, layer_widths[0])
    return MlpNet(input_dim, layer_widths)


def init_params(seed, input_dim, layer_widths, input_scales=None):
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    return make_network(input_dim, layer_widths).init_params(seed, input_scales)


def eval_network(params, point):
    """Value plus exact first/second input derivatives at one point."""
    net = params.network()
    q = net.quantities(params.theta, np.asarray(point, dtype=float)[None, :],
                       jet_keys(params.input_dim))
    return DerivativeBundle.from_quantities(
        {k: v[0] for k, v in q.items()}, params.input_dim)


def param_gradient_of_bundle(params, point):
    """d/d(theta) of the value and of every input partial at one point.

    Returns a dict mapping each derivative key to a length-P gradient.
    """
    net = params.network()
    jac = net.param_jacobian(params.theta, np.asarray(point, dtype=float)[None, :],
                             jet_keys(params.input_dim))
    return {k: v[0] for k, v in jac.items()}
