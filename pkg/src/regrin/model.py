"""The neural acceptor and its trainer.

Three parameter blocks drive the acceptor over a word ``a_1..a_l``: a
terminal unit maps the first letter to a belief vector over hypothesis
nonterminals (sigmoid of an n'-by-t logit matrix, column lookup); a
recurrent nonterminal unit advances beliefs one letter at a time (per-lhs
sigmoid matrices queried by the letter, dotted with the previous beliefs and
clamped to [0, 1]); a start selector takes the final beliefs to an
acceptance score via a softmax-weighted average.  Training minimises mean
binary cross-entropy plus a sharpening regularizer ``1 - (2e - 1)^2`` and a
production-use regularizer (mean of all sigmoid entries), with exact
analytic gradients (the clamp contributes its true subgradient: identity
inside (0, 1), zero outside) and Adam updates.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import Dataset, Example
from .grammars import SCHEMA_VERSION, Word
from .seeding import make_rng

BCE_EPS = 1e-7


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


def clamp(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


@dataclass
class ModelParams:
    """Pre-sigmoid production matrices and the start-selector logits."""

    term_logits: np.ndarray      # (n', t)
    nonterm_logits: np.ndarray   # (n', n', t), [lhs, prev, letter]
    start_logits: np.ndarray     # (n',)

    @property
    def n_prime(self) -> int:
        return self.term_logits.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.term_logits.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(self.term_logits.copy(), self.nonterm_logits.copy(),
                           self.start_logits.copy())

    def entry_count(self) -> int:
        # all sigmoid entries: n'._t terminal plus n'*n'*t nonterminal
        return self.term_logits.size + self.nonterm_logits.size


def init_params(n_prime: int, t: int, seed: int) -> ModelParams:
    """Standard-normal production logits, zero start logits."""
    rng = make_rng(seed)
    return ModelParams(
        term_logits=rng.standard_normal((n_prime, t)),
        nonterm_logits=rng.standard_normal((n_prime, n_prime, t)),
        start_logits=np.zeros(n_prime),
    )


@dataclass(frozen=True)
class TrainConfig:
    n_prime: int = 5
    lr: float = 0.005
    batch_size: int = 80
    max_epochs: int = 60
    beta: float = 0.05
    beta_start_frac: float = 0.6
    gamma: float = 0.02
    tau: float = 0.95
    adam_b1: float = 0.9
    adam_b2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    early_stop_epochs: int | None = None  # stable-grammar patience; None = off

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.beta_start_frac <= 1.0:
            raise ValueError("beta_start_frac must lie in [0, 1]")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie strictly between 0 and 1")

    @property
    def beta_start_epoch(self) -> int:
        return math.ceil(self.beta_start_frac * self.max_epochs)

    def beta_at(self, epoch: int) -> float:
        return self.beta if epoch >= self.beta_start_epoch else 0.0


@dataclass
class ForwardTrace:
    u_vectors: list[np.ndarray]   # post-clamp beliefs u_1..u_l
    pre_clamp: list[np.ndarray]   # unit outputs before clamping
    output: float                 # acceptance score in [0, 1]


def terminal_unit(params: ModelParams, letter_onehot: np.ndarray) -> np.ndarray:
    """Initial beliefs from the first letter: clamp(sigmoid(P_term) v)."""
    v = np.asarray(letter_onehot, dtype=float)
    if v.shape != (params.alphabet_size,):
        raise ValueError("one-hot vector has wrong dimension")
    return clamp(sigmoid(params.term_logits) @ v)


def nonterminal_unit(params: ModelParams, beliefs: np.ndarray,
                     letter_onehot: np.ndarray) -> np.ndarray:
    """Advance beliefs by one letter; entry k is the clamped dot product of
    the letter's column of the k-th production matrix with the beliefs."""
    v = np.asarray(letter_onehot, dtype=float)
    if v.shape != (params.alphabet_size,) or beliefs.shape != (params.n_prime,):
        raise ValueError("dimension mismatch")
    weights = sigmoid(params.nonterm_logits) @ v  # (n', n')
    return clamp(weights @ beliefs)


def start_selector(params: ModelParams, beliefs: np.ndarray) -> float:
    """Acceptance score: softmax(start logits) dotted with the beliefs."""
    return float(softmax(params.start_logits) @ beliefs)


def one_hot(letter: int, t: int) -> np.ndarray:
    v = np.zeros(t)
    v[letter] = 1.0
    return v


def forward(params: ModelParams, word: Word) -> ForwardTrace:
    """Run the acceptor on one word, keeping all intermediate beliefs."""
    if len(word) == 0:
        raise ValueError("cannot score the empty word")
    if any(not 0 <= a < params.alphabet_size for a in word):
        raise ValueError("letter index out of range")
    s_term = sigmoid(params.term_logits)
    s_nonterm = sigmoid(params.nonterm_logits)
    z = s_term[:, word[0]].copy()
    pre = [z]
    us = [clamp(z)]
    for letter in word[1:]:
        z = s_nonterm[:, :, letter] @ us[-1]
        pre.append(z)
        us.append(clamp(z))
    return ForwardTrace(us, pre, float(softmax(params.start_logits) @ us[-1]))


def sharpening_loss(params: ModelParams) -> float:
    """Mean of 1 - (2e - 1)^2 over all sigmoid entries; 0 when every entry
    sits at 0 or 1, maximal at 0.5."""
    total = 0.0
    for block in (params.term_logits, params.nonterm_logits):
        e = sigmoid(block)
        total += float(np.sum(1.0 - (2.0 * e - 1.0) ** 2))
    return total / params.entry_count()


def usage_loss(params: ModelParams) -> float:
    """Mean of all sigmoid entries; penalises large hypothesis grammars."""
    total = float(np.sum(sigmoid(params.term_logits))) + float(np.sum(sigmoid(params.nonterm_logits)))
    return total / params.entry_count()


def _pack_words(words: Sequence[Word]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad letter indices into an (m, L_max) matrix plus a length vector."""
    lengths = np.fromiter((len(w) for w in words), dtype=np.intp, count=len(words))
    letters = np.zeros((len(words), int(lengths.max())), dtype=np.intp)
    for i, w in enumerate(words):
        letters[i, :len(w)] = w
    return letters, lengths


def _forward_padded(s_term, s_nonterm, p_start, onehot, lengths):
    """Vectorized forward over a padded batch.

    Steps past a word's own length compute garbage that is never read: the
    final belief of each word is snapshot at its own length, and the
    backward pass injects gradient only at that index.
    """
    m, max_len, _ = onehot.shape
    n_prime = s_term.shape[0]
    pre = np.empty((max_len, m, n_prime))
    us = np.empty((max_len, m, n_prime))
    pre[0] = onehot[:, 0, :] @ s_term.T
    us[0] = np.minimum(pre[0], 1.0)
    if max_len > 1:
        # production-matrix columns for every (step, word), gathered at once
        w_all = np.einsum("kjc,mic->imkj", s_nonterm, onehot[:, 1:, :])
    else:
        w_all = None
    for i in range(1, max_len):
        pre[i] = np.matmul(w_all[i - 1], us[i - 1][:, :, None])[:, :, 0]
        us[i] = np.minimum(pre[i], 1.0)
    u_final = us[lengths - 1, np.arange(m), :]
    o_raw = u_final @ p_start
    return pre, us, w_all, u_final, o_raw


def scores(params: ModelParams, words: Sequence[Word]) -> np.ndarray:
    """Acceptance scores for many words, in input order."""
    if not words:
        return np.zeros(0)
    s_term = sigmoid(params.term_logits)
    s_nonterm = sigmoid(params.nonterm_logits)
    p_start = softmax(params.start_logits)
    letters, lengths = _pack_words(words)
    onehot = np.eye(params.alphabet_size)[letters]
    _, _, _, _, o_raw = _forward_padded(s_term, s_nonterm, p_start, onehot, lengths)
    return o_raw


def _loss_and_grads_packed(params: ModelParams, letters: np.ndarray, lengths: np.ndarray,
                           labels: np.ndarray, beta: float, gamma: float, want_grads: bool):
    n_prime, t = params.term_logits.shape
    s_term = sigmoid(params.term_logits)
    s_nonterm = sigmoid(params.nonterm_logits)
    p_start = softmax(params.start_logits)
    m = letters.shape[0]
    onehot = np.eye(t)[letters]
    pre, us, w_all, u_final, o_raw = _forward_padded(s_term, s_nonterm, p_start, onehot, lengths)

    n_entries = params.entry_count()
    sharp = (float(np.sum(1.0 - (2.0 * s_term - 1.0) ** 2))
             + float(np.sum(1.0 - (2.0 * s_nonterm - 1.0) ** 2))) / n_entries
    usage = (float(np.sum(s_term)) + float(np.sum(s_nonterm))) / n_entries
    o_clip = np.clip(o_raw, BCE_EPS, 1.0 - BCE_EPS)
    bce = -(labels * np.log(o_clip) + (1.0 - labels) * np.log(1.0 - o_clip))
    loss = float(np.mean(bce)) + beta * sharp + gamma * usage
    if not want_grads:
        return loss, o_raw, None

    inside = (o_raw > BCE_EPS) & (o_raw < 1.0 - BCE_EPS)
    g_o = (o_clip - labels) / (o_clip * (1.0 - o_clip)) * inside / m
    g_start = p_start * np.sum(g_o[:, None] * (u_final - o_raw[:, None]), axis=0)
    g_u_final = g_o[:, None] * p_start[None, :]

    max_len = letters.shape[1]
    end_index = lengths - 1
    g_u = np.zeros((m, n_prime))
    g_w_all = np.empty((max(max_len - 1, 0), m, n_prime, n_prime))
    for i in range(max_len - 1, 0, -1):
        ending = end_index == i
        if ending.any():
            g_u = g_u + np.where(ending[:, None], g_u_final, 0.0)
        g_z = g_u * ((pre[i] > 0.0) & (pre[i] < 1.0))
        g_w_all[i - 1] = g_z[:, :, None] * us[i - 1][:, None, :]
        g_u = np.matmul(g_z[:, None, :], w_all[i - 1])[:, 0, :]
    g_u = g_u + np.where((end_index == 0)[:, None], g_u_final, 0.0)
    g_z1 = g_u * ((pre[0] > 0.0) & (pre[0] < 1.0))

    g_sig_term = g_z1.T @ onehot[:, 0, :]  # (n', t)
    if max_len > 1:
        g_sig_nonterm = np.einsum("imkj,mic->kjc", g_w_all, onehot[:, 1:, :])
    else:
        g_sig_nonterm = np.zeros_like(s_nonterm)

    # regularizers act directly on the sigmoid entries
    gt = g_sig_term + (-4.0 * beta * (2.0 * s_term - 1.0) + gamma) / n_entries
    gn = g_sig_nonterm + (-4.0 * beta * (2.0 * s_nonterm - 1.0) + gamma) / n_entries
    grads = ModelParams(
        term_logits=gt * s_term * (1.0 - s_term),
        nonterm_logits=gn * s_nonterm * (1.0 - s_nonterm),
        start_logits=g_start,
    )
    return loss, o_raw, grads


def _loss_and_grads(params: ModelParams, batch: Sequence[Example], beta: float,
                    gamma: float, want_grads: bool):
    if not batch:
        raise ValueError("empty batch")
    letters, lengths = _pack_words([e.word for e in batch])
    labels = np.array([e.label for e in batch], dtype=float)
    return _loss_and_grads_packed(params, letters, lengths, labels, beta, gamma, want_grads)


def batch_loss(params: ModelParams, batch: Sequence[Example], beta: float,
               gamma: float) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy (scores clipped to [1e-7, 1 - 1e-7] before
    the log) plus the weighted regularizers; also returns per-example scores."""
    loss, outputs, _ = _loss_and_grads(params, batch, beta, gamma, want_grads=False)
    return loss, outputs


def gradients(params: ModelParams, batch: Sequence[Example], beta: float,
              gamma: float) -> ModelParams:
    """Exact analytic gradients of batch_loss w.r.t. every logit block."""
    _, _, grads = _loss_and_grads(params, batch, beta, gamma, want_grads=True)
    return grads


@dataclass
class AdamState:
    m_term: np.ndarray
    v_term: np.ndarray
    m_nonterm: np.ndarray
    v_nonterm: np.ndarray
    m_start: np.ndarray
    v_start: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(
            np.zeros_like(params.term_logits), np.zeros_like(params.term_logits),
            np.zeros_like(params.nonterm_logits), np.zeros_like(params.nonterm_logits),
            np.zeros_like(params.start_logits), np.zeros_like(params.start_logits),
        )


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, lr: float,
              b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8
              ) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    step = state.step + 1
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step

    def update(theta, g, m, v):
        m2 = b1 * m + (1.0 - b1) * g
        v2 = b2 * v + (1.0 - b2) * g * g
        theta2 = theta - lr * (m2 / c1) / (np.sqrt(v2 / c2) + eps)
        return theta2, m2, v2

    new_term, mt, vt = update(params.term_logits, grads.term_logits, state.m_term, state.v_term)
    new_nonterm, mn, vn = update(params.nonterm_logits, grads.nonterm_logits,
                                 state.m_nonterm, state.v_nonterm)
    new_start, ms, vs = update(params.start_logits, grads.start_logits,
                               state.m_start, state.v_start)
    return (ModelParams(new_term, new_nonterm, new_start),
            AdamState(mt, vt, mn, vn, ms, vs, step))


def grammar_fingerprint(params: ModelParams, tau: float) -> str:
    """Hash of the tau-thresholded production set plus the start choice."""
    items = []
    s_term = sigmoid(params.term_logits)
    s_nonterm = sigmoid(params.nonterm_logits)
    for i, j in np.argwhere(s_term >= tau):
        items.append(("T", int(i), int(j)))
    for k, i, j in np.argwhere(s_nonterm >= tau):
        items.append(("N", int(k), int(i), int(j)))
    items.append(("S", int(np.argmax(softmax(params.start_logits)))))
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    fingerprint: str


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochStats]
    adam_state: AdamState


def train_accuracy(params: ModelParams, examples: Sequence[Example]) -> float:
    o = scores(params, [e.word for e in examples])
    labels = np.array([e.label for e in examples])
    return float(np.mean((o > 0.5).astype(int) == labels))


def train(dataset: Dataset, cfg: TrainConfig) -> TrainResult:
    """Deterministic training run.

    Logits start from seeded standard normals (start logits zero); each
    epoch re-shuffles the examples and walks them in batches; the sharpening
    weight is 0 before ``ceil(beta_start_frac * max_epochs)`` epochs and
    ``cfg.beta`` afterwards.  Per epoch the history records mean batch loss,
    training accuracy at threshold 0.5, and the fingerprint of the
    tau-extracted grammar; with early stopping on, training ends once the
    fingerprint is unchanged and accuracy is 1.0 for the last
    ``early_stop_epochs`` epochs.
    """
    examples = list(dataset.examples)
    if not examples:
        raise ValueError("empty dataset")
    rng = make_rng(cfg.seed)
    params = ModelParams(
        term_logits=rng.standard_normal((cfg.n_prime, dataset.alphabet_size)),
        nonterm_logits=rng.standard_normal((cfg.n_prime, cfg.n_prime, dataset.alphabet_size)),
        start_logits=np.zeros(cfg.n_prime),
    )
    state = AdamState.zeros(params)
    letters_all, lengths_all = _pack_words([e.word for e in examples])
    labels_all = np.array([e.label for e in examples], dtype=float)
    history: list[EpochStats] = []
    for epoch in range(cfg.max_epochs):
        beta_now = cfg.beta_at(epoch)
        order = rng.permutation(len(examples))
        losses = []
        for lo in range(0, len(examples), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            sub_len = lengths_all[idx]
            loss, _, grads = _loss_and_grads_packed(
                params, letters_all[idx][:, :int(sub_len.max())], sub_len,
                labels_all[idx], beta_now, cfg.gamma, want_grads=True)
            params, state = adam_step(params, grads, state, cfg.lr,
                                      cfg.adam_b1, cfg.adam_b2, cfg.adam_eps)
            losses.append(loss)
        _, o_all, _ = _loss_and_grads_packed(params, letters_all, lengths_all, labels_all,
                                             0.0, 0.0, want_grads=False)
        stats = EpochStats(
            epoch=epoch,
            loss=float(np.mean(losses)),
            accuracy=float(np.mean((o_all > 0.5).astype(float) == labels_all)),
            fingerprint=grammar_fingerprint(params, cfg.tau),
        )
        history.append(stats)
        # stopping before the sharpening phase would freeze a half-sharp grammar,
        # so the whole stability window must lie inside it
        k = cfg.early_stop_epochs
        if k is not None and len(history) >= k and epoch >= cfg.beta_start_epoch + k - 1:
            tail = history[-k:]
            if all(h.accuracy == 1.0 and h.fingerprint == tail[0].fingerprint for h in tail):
                break
    return TrainResult(params, history, state)


def save_checkpoint(path: str | Path, params: ModelParams, cfg: TrainConfig,
                    terminals: tuple[str, ...], adam_state: AdamState,
                    epochs_run: int, nonterminals: tuple[str, ...] | None = None) -> None:
    data = {
        "schema": SCHEMA_VERSION,
        "kind": "checkpoint",
        "n_prime": params.n_prime,
        "alphabet_size": params.alphabet_size,
        "terminals": list(terminals),
        "nonterminals": list(nonterminals) if nonterminals is not None else None,
        "term_logits": params.term_logits.tolist(),
        "nonterm_logits": params.nonterm_logits.tolist(),
        "start_logits": params.start_logits.tolist(),
        "adam": {
            "step": adam_state.step,
            "m_term": adam_state.m_term.tolist(),
            "v_term": adam_state.v_term.tolist(),
            "m_nonterm": adam_state.m_nonterm.tolist(),
            "v_nonterm": adam_state.v_nonterm.tolist(),
            "m_start": adam_state.m_start.tolist(),
            "v_start": adam_state.v_start.tolist(),
        },
        "epochs_run": epochs_run,
        "config": asdict(cfg),
        "seed": cfg.seed,
    }
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    data = json.loads(Path(path).read_text())
    if data.get("kind") != "checkpoint":
        raise ValueError(f"{path} is not a checkpoint file")
    params = ModelParams(
        term_logits=np.array(data["term_logits"], dtype=float),
        nonterm_logits=np.array(data["nonterm_logits"], dtype=float),
        start_logits=np.array(data["start_logits"], dtype=float),
    )
    return params, data
