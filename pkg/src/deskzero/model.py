"""Policy-value network: plain numpy MLP with hand-written gradients.

Architecture: flatten(planes) -> dense(h) ReLU -> dense(h) ReLU, then a
policy head (dense to the action space, softmax) and a value head (dense to
one unit, tanh). Hidden layers use He fan-in initialization; both heads
start at zero so an untrained network emits uniform priors and value 0.

The loss is value MSE plus policy cross-entropy plus L2 on all parameters:
    (z - v)^2  -  sum_a pi_a log p_a  +  c * ||theta||^2
averaged over the batch. Gradients are analytic and verified against
central finite differences in the test suite.

Training mutates a Network in place under a single owner (the learner);
actors work from immutable snapshots produced by ``clone()``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .games import GameState, get_game

CHECKPOINT_VERSION = 1

_PARAM_NAMES = ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")


def encode(state: GameState) -> np.ndarray:
    """State to [3, rows, cols] planes from the mover's point of view.

    Plane 0 holds the pieces of the player to move, plane 1 the opponent's,
    plane 2 is all ones when player 1 is to move and all zeros otherwise.
    """
    game = get_game(state.game_id)
    board = np.asarray(state.board, dtype=np.float64).reshape(game.rows, game.cols)
    me = state.to_move
    planes = np.zeros((3, game.rows, game.cols), dtype=np.float64)
    planes[0] = board == me
    planes[1] = board == 3 - me
    if me == 1:
        planes[2] = 1.0
    return planes


@lru_cache(maxsize=32768)
def _flat_features(state: GameState) -> np.ndarray:
    """Cached flattened encoding for the search hot path. Treat as read-only."""
    return encode(state).reshape(-1)


@dataclass
class TrainingSample:
    """One replay entry: encoded state, search policy, final outcome.

    ``value_target`` is from the perspective of the player to move at the
    encoded state. ``policy_weight`` is 0 for positions whose search ran at
    a reduced playout cap: their policies are kept out of the loss while the
    value target still counts.
    """

    features: np.ndarray
    policy_target: np.ndarray
    value_target: float
    trajectory_id: int = -1
    policy_weight: float = 1.0


@dataclass
class LossReport:
    total: float
    value: float
    policy: float
    l2: float


class Network:
    """Mutable parameter container plus forward/backward passes."""

    def __init__(
        self,
        game_id: str,
        hidden_width: int = 128,
        dtype: str = "float64",
        rng: np.random.Generator | None = None,
    ):
        if hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        game = get_game(game_id)
        self.game_id = game_id
        self.hidden_width = hidden_width
        self.dtype = np.dtype(dtype)
        self.feature_shape = (3, game.rows, game.cols)
        self.in_features = 3 * game.rows * game.cols
        self.action_space_size = game.action_space_size
        self.step = 0

        rng = rng or np.random.default_rng()
        h, f, a = hidden_width, self.in_features, self.action_space_size
        self.w1 = (rng.standard_normal((f, h)) * np.sqrt(2.0 / f)).astype(self.dtype)
        self.b1 = np.zeros(h, dtype=self.dtype)
        self.w2 = (rng.standard_normal((h, h)) * np.sqrt(2.0 / h)).astype(self.dtype)
        self.b2 = np.zeros(h, dtype=self.dtype)
        self.wp = np.zeros((h, a), dtype=self.dtype)
        self.bp = np.zeros(a, dtype=self.dtype)
        self.wv = np.zeros((h, 1), dtype=self.dtype)
        self.bv = np.zeros(1, dtype=self.dtype)

    # ------------------------------------------------------------------
    # forward
    # ------------------------------------------------------------------

    def forward(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched forward pass.

        ``features`` is [n, 3, rows, cols] (or [n, in_features]); returns
        (policies [n, A] on the simplex, values [n] in (-1, 1)).
        """
        x = np.asarray(features, dtype=self.dtype).reshape(-1, self.in_features)
        _, _, _, a2, log_p, v = self._forward_full(x)
        return np.exp(log_p), v

    def _forward_full(self, x: np.ndarray):
        z1 = x @ self.w1 + self.b1
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ self.w2 + self.b2
        a2 = np.maximum(z2, 0.0)
        logits = a2 @ self.wp + self.bp
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        v = np.tanh(a2 @ self.wv + self.bv).reshape(-1)
        return z1, a1, z2, a2, log_p, v

    def __call__(self, state: GameState) -> tuple[np.ndarray, float]:
        """Single-state fast path used by search: (priors, value)."""
        x = _flat_features(state)
        if x.dtype != self.dtype:
            x = x.astype(self.dtype)
        a1 = np.maximum(x @ self.w1 + self.b1, 0.0)
        a2 = np.maximum(a1 @ self.w2 + self.b2, 0.0)
        logits = a2 @ self.wp + self.bp
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        v = math.tanh(float(a2 @ self.wv[:, 0]) + float(self.bv[0]))
        return p, v

    # ------------------------------------------------------------------
    # loss and training
    # ------------------------------------------------------------------

    def _batch_arrays(self, batch: list[TrainingSample]):
        x = np.stack([s.features.reshape(-1) for s in batch]).astype(self.dtype)
        pi = np.stack([s.policy_target for s in batch]).astype(self.dtype)
        z = np.asarray([s.value_target for s in batch], dtype=self.dtype)
        w = np.asarray([s.policy_weight for s in batch], dtype=self.dtype)
        return x, pi, z, w

    def loss(
        self, batch: list[TrainingSample], weight_decay: float
    ) -> tuple[LossReport, dict[str, np.ndarray]]:
        """Mean loss over the batch and gradients for every parameter."""
        if not batch:
            raise ValueError("loss needs a non-empty batch")
        x, pi, z, w = self._batch_arrays(batch)
        n = x.shape[0]

        z1, a1, z2, a2, log_p, v = self._forward_full(x)
        p = np.exp(log_p)

        value_loss = float(np.mean((z - v) ** 2))
        per_sample_ce = -(pi * log_p).sum(axis=1)
        policy_loss = float((w * per_sample_ce).sum() / n)
        l2 = float(weight_decay * sum(float((getattr(self, name) ** 2).sum())
                                      for name in _PARAM_NAMES))
        report = LossReport(
            total=value_loss + policy_loss + l2,
            value=value_loss,
            policy=policy_loss,
            l2=l2,
        )

        # backward
        d_logits = (w[:, None] * (p - pi)) / n
        d_u = (2.0 * (v - z) * (1.0 - v**2) / n)[:, None]
        d_a2 = d_logits @ self.wp.T + d_u @ self.wv.T
        d_z2 = d_a2 * (z2 > 0)
        d_a1 = d_z2 @ self.w2.T
        d_z1 = d_a1 * (z1 > 0)

        c2 = 2.0 * weight_decay
        grads = {
            "wp": a2.T @ d_logits + c2 * self.wp,
            "bp": d_logits.sum(axis=0) + c2 * self.bp,
            "wv": a2.T @ d_u + c2 * self.wv,
            "bv": d_u.sum(axis=0) + c2 * self.bv,
            "w2": a1.T @ d_z2 + c2 * self.w2,
            "b2": d_z2.sum(axis=0) + c2 * self.b2,
            "w1": x.T @ d_z1 + c2 * self.w1,
            "b1": d_z1.sum(axis=0) + c2 * self.b1,
        }
        return report, grads

    def sgd_step(
        self, batch: list[TrainingSample], lr: float, weight_decay: float
    ) -> LossReport:
        """One plain SGD update: theta <- theta - lr * grad. Bumps the step counter."""
        if lr < 0:
            raise ValueError("lr must be non-negative")
        report, grads = self.loss(batch, weight_decay)
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise FloatingPointError(
                    f"non-finite gradient in {name} at step {self.step}"
                )
            getattr(self, name)[...] -= lr * grad.astype(self.dtype)
        self.step += 1
        return report

    # ------------------------------------------------------------------
    # snapshots and persistence
    # ------------------------------------------------------------------

    def clone(self) -> "Network":
        """Independent copy; the learner publishes these as actor snapshots."""
        twin = Network.__new__(Network)
        twin.__dict__.update(
            {k: v for k, v in self.__dict__.items() if not isinstance(v, np.ndarray)}
        )
        for name in _PARAM_NAMES:
            setattr(twin, name, getattr(self, name).copy())
        return twin

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).reshape(-1) for n in _PARAM_NAMES])

    def set_parameter_vector(self, flat: np.ndarray) -> None:
        offset = 0
        for name in _PARAM_NAMES:
            array = getattr(self, name)
            chunk = flat[offset : offset + array.size]
            array[...] = chunk.reshape(array.shape).astype(self.dtype)
            offset += array.size
        if offset != flat.size:
            raise ValueError("parameter vector length mismatch")

    def save(self, path) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "game_id": self.game_id,
            "hidden_width": self.hidden_width,
            "dtype": str(self.dtype),
            "step": self.step,
        }
        arrays = {name: getattr(self, name) for name in _PARAM_NAMES}
        with open(path, "wb") as fh:
            np.savez(fh, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path, expect_game_id: str | None = None) -> "Network":
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                arrays = {name: data[name] for name in _PARAM_NAMES}
        except FileNotFoundError:
            raise
        except Exception as exc:
            raise OSError(f"unreadable checkpoint {path}: {exc}") from exc
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"checkpoint {path} has version {meta.get('version')}, "
                f"expected {CHECKPOINT_VERSION}"
            )
        if expect_game_id is not None and meta["game_id"] != expect_game_id:
            raise ValueError(
                f"checkpoint {path} is for {meta['game_id']!r}, "
                f"expected {expect_game_id!r}"
            )
        net = cls(meta["game_id"], hidden_width=meta["hidden_width"], dtype=meta["dtype"])
        for name in _PARAM_NAMES:
            current = getattr(net, name)
            if arrays[name].shape != current.shape:
                raise ValueError(
                    f"checkpoint {path} architecture mismatch in {name}: "
                    f"{arrays[name].shape} vs {current.shape}"
                )
            setattr(net, name, arrays[name].astype(net.dtype))
        net.step = int(meta["step"])
        return net


def save_checkpoint(net: Network, path) -> None:
    net.save(path)


def load_checkpoint(path, expect_game_id: str | None = None) -> Network:
    return Network.load(path, expect_game_id=expect_game_id)
