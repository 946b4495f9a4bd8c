"""Learned policy heads on top of the history encoding F(h_t).

Three action modes: a masked categorical over a fixed action set, an
autoregressive character-sequence decoder for string inputs, and an
autoregressive grid decoder (size prefix, then row-major cell tokens) for
grid-world inputs. All heads expose the same pair of entry points: act() for
sampling during rollouts and score() for re-evaluating a stored action on the
gradient tape.

Masking uses a -1e30 logit offset: large enough that exp() underflows to an
exact 0 probability, small enough that log-space arithmetic stays finite, so
entropy terms contribute exactly 0 instead of NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import (
    Embedding,
    Linear,
    LSTMCell,
    MLP,
    Tensor,
    concat,
    exp,
    load_params,
    log,
    no_grad,
    save_params,
    reduce_max,
    reduce_sum,
    reshape,
    slice_,
    softmax,
    tanh,
)

MASK_OFFSET = -1e30


@dataclass
class PolicyOutput:
    action: object
    log_probability: float
    value_estimate: float
    entropy: float


def _pick(t, i):
    """Scalar Tensor t[i] from a 1-D tensor."""
    return reshape(slice_(t, i, i + 1), ())


def masked_log_probs(logits, mask):
    """Log-probabilities with invalid entries pinned near MASK_OFFSET. Returns
    (log_probs, probs); probs are exactly 0 on masked-out entries."""
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("all actions are masked")
        offset = np.where(mask, 0.0, MASK_OFFSET)
        logits = logits + Tensor(offset)
    m = reduce_max(logits)
    shifted = logits - m
    log_z = log(reduce_sum(exp(shifted)))
    log_probs = shifted - log_z
    probs = softmax(logits, axis=0)
    return log_probs, probs


def _entropy(log_probs, probs):
    # 0 * MASK_OFFSET-ish = -0.0 on masked entries, so the sum stays exact.
    return -reduce_sum(probs * log_probs)


def sample_index(probs, rng):
    c = np.cumsum(probs)
    c[-1] = 1.0
    return int(np.searchsorted(c, rng.random(), side="right"))


class CategoricalHead:
    """Masked softmax over a fixed action set."""

    kind = "categorical"

    def __init__(self, params, name, in_width, n_actions):
        self.out = Linear(params, f"{name}/logits", in_width, n_actions)
        self.n_actions = n_actions

    def act(self, F, rng, mode="sample", mask=None):
        with no_grad():
            log_probs, probs = masked_log_probs(self.out(F), mask)
            p = probs.data
            a = int(np.argmax(p)) if mode == "greedy" else sample_index(p, rng)
            return PolicyOutput(
                action=a,
                log_probability=float(log_probs.data[a]),
                value_estimate=0.0,
                entropy=float(_entropy(log_probs, probs).data),
            )

    def score(self, F, action, mask=None):
        log_probs, probs = masked_log_probs(self.out(F), mask)
        return _pick(log_probs, int(action)), _entropy(log_probs, probs)

    def encode_action_width(self):
        return None  # finite actions use the history encoder's embedding table


class _Decoder:
    """Shared LSTM machinery for the sequence heads: the conditioning vector F
    seeds the initial state and rides along with every step's input."""

    def __init__(self, params, name, in_width, hidden, n_rows, out_dim):
        self.hidden = hidden
        self.embed = Embedding(params, f"{name}/tok", n_rows, hidden)
        self.init_h = Linear(params, f"{name}/init_h", in_width, hidden)
        self.init_c = Linear(params, f"{name}/init_c", in_width, hidden)
        self.cell = LSTMCell(params, f"{name}/cell", hidden + in_width, hidden)
        self.out = Linear(params, f"{name}/out", hidden, out_dim)

    def start(self, F):
        return tanh(self.init_h(F)), tanh(self.init_c(F))

    def advance(self, state, token_row, F):
        x = concat([_row(self.embed([token_row])), F], axis=0)
        return self.cell(x, state)


def _row(t):
    return reshape(t, (t.data.shape[1],))


PRINTABLE = [chr(i) for i in range(32, 127)]  # 95 characters
CHAR_EOS = len(PRINTABLE)  # 95
CHAR_BOS = CHAR_EOS + 1  # embedding row only, never emitted


class CharSeqDecoder:
    """Autoregressive printable-character decoder; emits until the stop token
    or max_len characters. The action is the decoded string; g_x(action) is
    the decoder's final hidden state."""

    kind = "charseq"

    def __init__(self, params, name, in_width, hidden=32, max_len=64):
        self.max_len = max_len
        self.dec = _Decoder(params, name, in_width, hidden, CHAR_BOS + 1, CHAR_EOS + 1)
        self.hidden = hidden

    def _tokens_of(self, text):
        ids = [PRINTABLE.index(ch) if ch in _PRINTABLE_SET else None for ch in text]
        if any(i is None for i in ids):
            raise ValueError("string contains non-printable characters")
        if len(text) < self.max_len:
            ids.append(CHAR_EOS)
        return ids

    def _walk(self, F, rng=None, mode="sample", forced=None):
        state = self.dec.start(F)
        prev = CHAR_BOS
        total_lp, total_ent = None, None
        emitted = []
        steps = len(forced) if forced is not None else self.max_len + 1
        for i in range(steps):
            h, c = self.dec.advance(state, prev, F)
            state = (h, c)
            log_probs, probs = masked_log_probs(self.dec.out(h), None)
            if forced is not None:
                tok = forced[i]
            elif mode == "greedy":
                tok = int(np.argmax(probs.data))
            else:
                tok = sample_index(probs.data, rng)
            lp = _pick(log_probs, tok)
            ent = _entropy(log_probs, probs)
            total_lp = lp if total_lp is None else total_lp + lp
            total_ent = ent if total_ent is None else total_ent + ent
            if forced is None:
                if tok == CHAR_EOS:
                    break
                emitted.append(tok)
                if len(emitted) == self.max_len:
                    break
            prev = tok
        text = "".join(PRINTABLE[t] for t in (forced or emitted) if t != CHAR_EOS)
        return text, total_lp, total_ent, state[0]

    def act(self, F, rng, mode="sample", mask=None):
        with no_grad():
            text, lp, ent, _ = self._walk(F, rng=rng, mode=mode)
        return PolicyOutput(
            action=text,
            log_probability=float(lp.data),
            value_estimate=0.0,
            entropy=float(ent.data),
        )

    def score(self, F, action, mask=None):
        _, lp, ent, _ = self._walk(F, forced=self._tokens_of(action))
        return lp, ent

    def encode_action(self, F, action):
        """g_x: final hidden state after consuming the whole string."""
        _, _, _, h = self._walk(F, forced=self._tokens_of(action))
        return h

    def encode_action_width(self):
        return self.hidden


_PRINTABLE_SET = set(PRINTABLE)


@dataclass(frozen=True)
class GridAction:
    """A decoded grid: side length and row-major cell token ids."""

    size: int
    tokens: tuple

    def __str__(self):
        return f"{self.size}x{self.size}:" + ",".join(str(t) for t in self.tokens)


class GridDecoder:
    """Grid head: one size-prefix token choosing the side length, then size^2
    cell tokens. Exactly one hero token is enforced by masking: hero tokens are
    masked out after one is placed, and everything else is masked out when the
    last cell would otherwise leave the grid without a hero."""

    kind = "grid"

    def __init__(self, params, name, in_width, vocab, hero_ids, sizes=(4, 5, 6, 7, 8), hidden=32):
        self.vocab = list(vocab)
        self.hero_ids = frozenset(hero_ids)
        if not self.hero_ids:
            raise ValueError("grid decoder needs at least one hero token id")
        self.sizes = tuple(sizes)
        self.hidden = hidden
        n_vocab = len(self.vocab)
        # Embedding rows: cell tokens, then one row per size choice, then BOS.
        self.bos_row = n_vocab + len(self.sizes)
        self.dec = _Decoder(params, name, in_width, hidden, self.bos_row + 1, n_vocab)
        self.size_out = Linear(params, f"{name}/size", hidden, len(self.sizes))

    def _cell_mask(self, hero_done, cells_left):
        mask = np.ones(len(self.vocab), dtype=bool)
        if hero_done:
            for h in self.hero_ids:
                mask[h] = False
        elif cells_left == 1:
            mask[:] = False
            for h in self.hero_ids:
                mask[h] = True
        return mask

    def _walk(self, F, rng=None, mode="sample", forced=None):
        state = self.dec.start(F)
        h, c = self.dec.advance(state, self.bos_row, F)
        state = (h, c)
        size_log_probs, size_probs = masked_log_probs(self.size_out(h), None)
        if forced is not None:
            size_idx = self.sizes.index(forced.size)
        elif mode == "greedy":
            size_idx = int(np.argmax(size_probs.data))
        else:
            size_idx = sample_index(size_probs.data, rng)
        total_lp = _pick(size_log_probs, size_idx)
        total_ent = _entropy(size_log_probs, size_probs)
        size = self.sizes[size_idx]
        prev = len(self.vocab) + size_idx  # the size token's embedding row
        tokens = []
        hero_done = False
        for i in range(size * size):
            h, c = self.dec.advance(state, prev, F)
            state = (h, c)
            mask = self._cell_mask(hero_done, size * size - i)
            log_probs, probs = masked_log_probs(self.dec.out(h), mask)
            if forced is not None:
                tok = forced.tokens[i]
            elif mode == "greedy":
                tok = int(np.argmax(probs.data))
            else:
                tok = sample_index(probs.data, rng)
            total_lp = total_lp + _pick(log_probs, tok)
            total_ent = total_ent + _entropy(log_probs, probs)
            hero_done = hero_done or tok in self.hero_ids
            tokens.append(tok)
            prev = tok
        action = forced if forced is not None else GridAction(size=size, tokens=tuple(tokens))
        return action, total_lp, total_ent, state[0]

    def act(self, F, rng, mode="sample", mask=None):
        with no_grad():
            action, lp, ent, _ = self._walk(F, rng=rng, mode=mode)
        return PolicyOutput(
            action=action,
            log_probability=float(lp.data),
            value_estimate=0.0,
            entropy=float(ent.data),
        )

    def score(self, F, action, mask=None):
        if action.size not in self.sizes:
            raise ValueError(f"size {action.size} not among {self.sizes}")
        _, lp, ent, _ = self._walk(F, forced=action)
        return lp, ent

    def encode_action(self, F, action):
        _, _, _, h = self._walk(F, forced=action)
        return h

    def encode_action_width(self):
        return self.hidden


class ValueHead:
    def __init__(self, params, name, in_width, hidden=32):
        self.net = MLP(params, name, [in_width, hidden, 1])

    def __call__(self, F):
        return reshape(self.net(F), ())


@dataclass
class HeadConfig:
    kind: str  # categorical | charseq | grid
    in_width: int
    n_actions: int = 0
    hidden: int = 32
    max_len: int = 64
    sizes: tuple = (4, 5, 6, 7, 8)
    vocab: tuple = ()
    hero_ids: tuple = ()


def build_head(params, name, config):
    if config.kind == "categorical":
        return CategoricalHead(params, name, config.in_width, config.n_actions)
    if config.kind == "charseq":
        return CharSeqDecoder(params, name, config.in_width, config.hidden, config.max_len)
    if config.kind == "grid":
        return GridDecoder(
            params,
            name,
            config.in_width,
            config.vocab,
            config.hero_ids,
            sizes=config.sizes,
            hidden=config.hidden,
        )
    raise ValueError(f"unknown head kind {config.kind!r}")


def learned_act(F_ht, head_config, params, rng, mode="sample", mask=None):
    """One action from a policy head plus the value estimate, as plain floats."""
    head = build_head(params, "policy", head_config)
    value = ValueHead(params, "value", head_config.in_width)
    out = head.act(F_ht, rng, mode=mode, mask=mask)
    with no_grad():
        out.value_estimate = float(value(F_ht).data)
    return out


class LearnedPolicy:
    """run_episode adapter: folds the history incrementally through the
    encoder and acts through one head (or a per-decision bank of heads).

    The incremental state is reset whenever a fresh history (single record) is
    seen, so one policy instance can serve many sequential episodes.
    """

    def __init__(self, encoder, head, value_head, mode="sample", head_bank=None, value_bank=None):
        self.encoder = encoder
        self.head = head
        self.value_head = value_head
        self.head_bank = head_bank  # optional list: decision index -> head
        self.value_bank = value_bank
        self.mode = mode
        self._state = None
        self._consumed = 0

    def head_for(self, t):
        if self.head_bank is not None:
            return self.head_bank[min(t, len(self.head_bank) - 1)]
        return self.head

    def value_for(self, t):
        if self.value_bank is not None:
            return self.value_bank[min(t, len(self.value_bank) - 1)]
        return self.value_head

    def __call__(self, history, env, rng):
        with no_grad():
            if len(history.records) == 1:
                self._state = self.encoder.init_state()
                self._consumed = 0
            for rec in history.records[self._consumed :]:
                F, self._state = self.encoder.fold(
                    self._state, self.encoder.summary(rec, history.program)
                )
                self._consumed += 1
            t = self._consumed - 1  # decision index: 0 for the first action
            mask = env.action_mask() if hasattr(env, "action_mask") else None
            out = self.head_for(t).act(F, rng, mode=self.mode, mask=mask)
            out.value_estimate = float(self.value_for(t)(F).data)
        return out.action, {
            "logprob": out.log_probability,
            "value": out.value_estimate,
            "entropy": out.entropy,
            "mask": mask,
        }


class PolicyModel:
    """Bundle of everything a learned agent needs: the parameter store, the
    history encoder, and the action/value heads (optionally per-decision
    banks). Rollout workers make disposable LearnedPolicy adapters from it;
    the trainer replays episodes through score() on the tape."""

    def __init__(self, params, encoder, head, value_head, head_bank=None, value_bank=None):
        self.params = params
        self.encoder = encoder
        self.head = head
        self.value_head = value_head
        self.head_bank = head_bank
        self.value_bank = value_bank

    def head_for(self, t):
        if self.head_bank is not None:
            return self.head_bank[min(t, len(self.head_bank) - 1)]
        return self.head

    def value_for(self, t):
        if self.value_bank is not None:
            return self.value_bank[min(t, len(self.value_bank) - 1)]
        return self.value_head

    def policy(self, mode="sample"):
        return LearnedPolicy(
            self.encoder,
            self.head,
            self.value_head,
            mode=mode,
            head_bank=self.head_bank,
            value_bank=self.value_bank,
        )

    def save(self, path, meta=None):
        save_params(path, self.params.snapshot(), meta=meta)

    def load(self, path):
        arrays, meta = load_params(path)
        self.params.load_values(arrays)
        return meta
