"""The two fixed recurrent architectures, their init, and Adam.

Parameter registries are ordered dicts; the declared order below is the
checkpoint field order:

  policy: lstm.W_x{i,f,g,o}, lstm.W_h{i,f,g,o}, lstm.b_{i,f,g,o}
          (interleaved per gate: W_xi, W_hi, b_i, W_xf, ...),
          trunk.W, trunk.b, head_mean.W, head_mean.b, log_std,
          aux.W, aux.b
  value:  lstm (same per-gate interleaving), trunk.W, trunk.b,
          head.W, head.b

Weights are orthogonal (QR with sign-fixed diagonal) scaled by a
per-layer gain; biases start at zero; log_std starts at -0.5.  Each
network offers a taped ``forward`` (for updates) and a plain-ndarray
``forward_np`` (for rollout collection); both evaluate the identical
numpy expressions, and a test pins them bit-equal.
"""

from __future__ import annotations

import math
from typing import Dict

import numpy as np

from .autodiff import Tensor

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_GATES = "ifgo"


def orthogonal(rng: np.random.Generator, shape: tuple[int, int],
               gain: float) -> np.ndarray:
    """Orthogonal matrix via QR, sign-fixed so the draw is canonical."""
    n, m = shape
    a = rng.standard_normal((max(n, m), min(n, m)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n < m:
        q = q.T
    return np.ascontiguousarray(gain * q[:n, :m])


class LSTM:
    """Single-layer LSTM with per-gate weight matrices (i, f, g, o)."""

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator,
                 prefix: str, params: Dict[str, Tensor]):
        self.n_in, self.n_hidden = n_in, n_hidden
        self.keys = []
        for g in _GATES:
            for name, shape in ((f"W_x{g}", (n_in, n_hidden)),
                                (f"W_h{g}", (n_hidden, n_hidden))):
                params[f"{prefix}.{name}"] = Tensor(
                    orthogonal(rng, shape, gain=1.0))
                self.keys.append(f"{prefix}.{name}")
            params[f"{prefix}.b_{g}"] = Tensor(np.zeros(n_hidden))
            self.keys.append(f"{prefix}.b_{g}")
        self._p = params
        self._prefix = prefix

    def _gate(self, name: str) -> Tensor:
        return self._p[f"{self._prefix}.{name}"]

    def forward(self, seq: np.ndarray) -> Tensor:
        """Taped pass over seq (B, T, n_in); returns last hidden (B, H)."""
        b = seq.shape[0]
        h = Tensor(np.zeros((b, self.n_hidden)))
        c = Tensor(np.zeros((b, self.n_hidden)))
        for t in range(seq.shape[1]):
            x = Tensor(seq[:, t, :])
            i = (x @ self._gate("W_xi") + h @ self._gate("W_hi")
                 + self._gate("b_i")).sigmoid()
            f = (x @ self._gate("W_xf") + h @ self._gate("W_hf")
                 + self._gate("b_f")).sigmoid()
            g = (x @ self._gate("W_xg") + h @ self._gate("W_hg")
                 + self._gate("b_g")).tanh()
            o = (x @ self._gate("W_xo") + h @ self._gate("W_ho")
                 + self._gate("b_o")).sigmoid()
            c = f * c + i * g
            h = o * c.tanh()
        return h

    def forward_np(self, seq: np.ndarray) -> np.ndarray:
        def sig(z):
            return 1.0 / (1.0 + np.exp(-z))

        p = {name: self._gate(name).data
             for name in ("W_xi", "W_hi", "b_i", "W_xf", "W_hf", "b_f",
                          "W_xg", "W_hg", "b_g", "W_xo", "W_ho", "b_o")}
        b = seq.shape[0]
        h = np.zeros((b, self.n_hidden))
        c = np.zeros((b, self.n_hidden))
        for t in range(seq.shape[1]):
            x = seq[:, t, :]
            i = sig(x @ p["W_xi"] + h @ p["W_hi"] + p["b_i"])
            f = sig(x @ p["W_xf"] + h @ p["W_hf"] + p["b_f"])
            g = np.tanh(x @ p["W_xg"] + h @ p["W_hg"] + p["b_g"])
            o = sig(x @ p["W_xo"] + h @ p["W_ho"] + p["b_o"])
            c = f * c + i * g
            h = o * np.tanh(c)
        return h


class PolicyNet:
    """LSTM(64) -> tanh dense(128) -> action mean, plus learned log-std
    and the auxiliary value head used by the PPG sleep phase."""

    TANH_GAIN = 5.0 / 3.0
    MEAN_GAIN = 0.01

    def __init__(self, rng: np.random.Generator, n_in: int = 3,
                 n_hidden: int = 64, n_trunk: int = 128, n_act: int = 2,
                 log_std_init: float = -0.5):
        self.params: Dict[str, Tensor] = {}
        self.lstm = LSTM(n_in, n_hidden, rng, "lstm", self.params)
        p = self.params
        p["trunk.W"] = Tensor(orthogonal(rng, (n_hidden, n_trunk),
                                         self.TANH_GAIN))
        p["trunk.b"] = Tensor(np.zeros(n_trunk))
        p["head_mean.W"] = Tensor(orthogonal(rng, (n_trunk, n_act),
                                             self.MEAN_GAIN))
        p["head_mean.b"] = Tensor(np.zeros(n_act))
        p["log_std"] = Tensor(np.full(n_act, log_std_init))
        p["aux.W"] = Tensor(orthogonal(rng, (n_trunk, 1), 1.0))
        p["aux.b"] = Tensor(np.zeros(1))
        self.widths = (n_in, n_hidden, n_trunk, n_act)

    def forward(self, seq: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """(mean (B, n_act), log_std (n_act,) clamped, aux value (B, 1))."""
        p = self.params
        h = self.lstm.forward(seq)
        trunk = (h @ p["trunk.W"] + p["trunk.b"]).tanh()
        mean = trunk @ p["head_mean.W"] + p["head_mean.b"]
        log_std = p["log_std"].clip(LOG_STD_MIN, LOG_STD_MAX)
        aux = trunk @ p["aux.W"] + p["aux.b"]
        return mean, log_std, aux

    def forward_np(self, seq: np.ndarray) -> tuple[np.ndarray, np.ndarray,
                                                   np.ndarray]:
        p = self.params
        h = self.lstm.forward_np(seq)
        trunk = np.tanh(h @ p["trunk.W"].data + p["trunk.b"].data)
        mean = trunk @ p["head_mean.W"].data + p["head_mean.b"].data
        log_std = np.clip(p["log_std"].data, LOG_STD_MIN, LOG_STD_MAX)
        aux = trunk @ p["aux.W"].data + p["aux.b"].data
        return mean, log_std, aux


class ValueNet:
    """LSTM(128) -> tanh dense(128) -> scalar state value."""

    TANH_GAIN = 5.0 / 3.0

    def __init__(self, rng: np.random.Generator, n_in: int = 3,
                 n_hidden: int = 128, n_trunk: int = 128):
        self.params: Dict[str, Tensor] = {}
        self.lstm = LSTM(n_in, n_hidden, rng, "lstm", self.params)
        p = self.params
        p["trunk.W"] = Tensor(orthogonal(rng, (n_hidden, n_trunk),
                                         self.TANH_GAIN))
        p["trunk.b"] = Tensor(np.zeros(n_trunk))
        p["head.W"] = Tensor(orthogonal(rng, (n_trunk, 1), 1.0))
        p["head.b"] = Tensor(np.zeros(1))
        self.widths = (n_in, n_hidden, n_trunk)

    def forward(self, seq: np.ndarray) -> Tensor:
        p = self.params
        h = self.lstm.forward(seq)
        trunk = (h @ p["trunk.W"] + p["trunk.b"]).tanh()
        return trunk @ p["head.W"] + p["head.b"]

    def forward_np(self, seq: np.ndarray) -> np.ndarray:
        p = self.params
        h = self.lstm.forward_np(seq)
        trunk = np.tanh(h @ p["trunk.W"].data + p["trunk.b"].data)
        return trunk @ p["head.W"].data + p["head.b"].data


class Adam:
    """Adam over an ordered parameter registry; moments are exposed for
    checkpointing."""

    def __init__(self, params: Dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
