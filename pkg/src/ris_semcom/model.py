"""The four trainable networks and their binary checkpoint format.

Transmit side: a transformer encoder turns token ids into per-token feature
vectors (the semantic encoder), and a per-token dense layer maps each
feature vector to ``symbols_per_token`` complex symbols which are then
power-normalized to unit mean symbol power (the channel encoder).

Receive side: a per-token dense layer lifts the received symbols back to
feature vectors (the channel decoder), and a transformer decoder with
causal self-attention and cross-attention over those features predicts the
token sequence (the semantic decoder), either teacher-forced for training
or step-by-step greedy for inference.

Everything runs on the float64 autodiff tensors from `.autodiff`; complex
symbols live in a trailing re/im axis of size 2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, embedding, layer_norm, matmul, maximum, relu, softmax
from .errors import ConfigError
from .text import END_ID, PAD_ID, START_ID, TokenBatch

MASK_BIAS = -1e9
POWER_FLOOR = 1e-12

CHECKPOINT_MAGIC = b"RSC1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ShapeConfig:
    """Static dimensions of the transceiver.

    ``max_len`` is the token-slot count per sentence (sentence words + the
    START/END wrapper), ``symbols_per_token`` the complex symbols each token
    slot occupies on air, so a sentence is ``max_len * symbols_per_token``
    complex symbols.  ``feature_dim`` is the width of the received feature
    vectors handed to the semantic decoder.
    """

    vocab_size: int
    max_len: int = 22
    embed_dim: int = 64
    num_heads: int = 4
    num_layers: int = 2
    ffn_width: int = 128
    symbols_per_token: int = 8
    feature_dim: int = 64
    batch_size: int = 64

    def __post_init__(self):
        for name in (
            "vocab_size",
            "max_len",
            "embed_dim",
            "num_heads",
            "num_layers",
            "ffn_width",
            "symbols_per_token",
            "feature_dim",
            "batch_size",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        if self.max_len < 3:
            raise ConfigError(f"max_len must leave room for START/END plus a word, got {self.max_len}")
        if self.vocab_size < 5:
            raise ConfigError(f"vocab_size must exceed the four reserved ids, got {self.vocab_size}")

    @property
    def stream_len(self) -> int:
        """Complex symbols per sentence."""
        return self.max_len * self.symbols_per_token


@dataclass
class SymbolStream:
    """A normalized batch of transmit symbols.

    ``symbols`` is a (B, stream_len, 2) Tensor; ``mean_power`` is the
    measured batch-mean symbol power after normalization (== 1 whenever the
    raw power was above the numerical floor).
    """

    symbols: Tensor
    mean_power: float


def sinusoid_table(max_len: int, dim: int) -> np.ndarray:
    """Fixed sin/cos position features, one row per token slot."""
    positions = np.arange(max_len)[:, None].astype(np.float64)
    freqs = np.exp(-np.log(10000.0) * (2.0 * (np.arange(dim) // 2)) / dim)
    angles = positions * freqs[None, :]
    table = np.zeros((max_len, dim))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


class TransceiverParams:
    """Flat, ordered collection of named parameter tensors.

    Names are slash-paths grouped by network:  ``semantic_encoder/...``,
    ``channel_encoder/...``, ``channel_decoder/...``, ``semantic_decoder/...``.
    Creation order is deterministic, which fixes both the initializer's
    random draw order and the checkpoint record order.
    """

    GROUPS = ("semantic_encoder", "channel_encoder", "channel_decoder", "semantic_decoder")

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    @classmethod
    def init(cls, cfg: ShapeConfig, seed) -> "TransceiverParams":
        rng = np.random.default_rng(seed)
        tensors: dict[str, Tensor] = {}

        def glorot(name: str, fan_in: int, fan_out: int, shape=None):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))
            tensors[name] = Tensor(data, requires_grad=True, name=name)

        def dense(name: str, d_in: int, d_out: int):
            glorot(f"{name}/weight", d_in, d_out)
            tensors[f"{name}/bias"] = Tensor(np.zeros(d_out), requires_grad=True, name=f"{name}/bias")

        def norm(name: str, dim: int):
            tensors[f"{name}/gain"] = Tensor(np.ones(dim), requires_grad=True, name=f"{name}/gain")
            tensors[f"{name}/bias"] = Tensor(np.zeros(dim), requires_grad=True, name=f"{name}/bias")

        def attention(name: str, d_query: int, d_key: int, d_model: int):
            dense(f"{name}/q", d_query, d_model)
            # no bias on the key projection: the softmax is invariant to a
            # constant shift of every key, so such a bias can never act
            glorot(f"{name}/k/weight", d_key, d_model)
            dense(f"{name}/v", d_key, d_model)
            dense(f"{name}/out", d_model, d_model)

        e, f, v = cfg.embed_dim, cfg.ffn_width, cfg.vocab_size

        glorot("semantic_encoder/embed", v, e)
        for i in range(cfg.num_layers):
            base = f"semantic_encoder/layer{i}"
            attention(f"{base}/self_attn", e, e, e)
            norm(f"{base}/norm_attn", e)
            dense(f"{base}/ffn/in", e, f)
            dense(f"{base}/ffn/out", f, e)
            norm(f"{base}/norm_ffn", e)

        dense("channel_encoder", e, 2 * cfg.symbols_per_token)
        dense("channel_decoder", 2 * cfg.symbols_per_token, cfg.feature_dim)

        glorot("semantic_decoder/embed", v, e)
        for i in range(cfg.num_layers):
            base = f"semantic_decoder/layer{i}"
            attention(f"{base}/self_attn", e, e, e)
            norm(f"{base}/norm_self", e)
            attention(f"{base}/cross_attn", e, cfg.feature_dim, e)
            norm(f"{base}/norm_cross", e)
            dense(f"{base}/ffn/in", e, f)
            dense(f"{base}/ffn/out", f, e)
            norm(f"{base}/norm_ffn", e)
        dense("semantic_decoder/out", e, v)

        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def names(self) -> list[str]:
        return list(self._tensors)

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def items(self):
        return self._tensors.items()

    def group(self, prefix: str) -> dict[str, Tensor]:
        return {n: t for n, t in self._tensors.items() if n.startswith(prefix + "/") or n == prefix}

    def copy_state(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._tensors.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        """Overwrite parameter buffers in place; names and shapes must match."""
        missing = set(self._tensors) - set(state)
        unexpected = set(state) - set(self._tensors)
        if missing or unexpected:
            raise ConfigError(
                f"checkpoint does not match model: missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(unexpected)[:3]}"
            )
        for name, tensor in self._tensors.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != tensor.shape:
                raise ConfigError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, model wants {tensor.shape}"
                )
            tensor.data = arr.copy()


# -- checkpoint file format ------------------------------------------------


def save_checkpoint(path: str | Path, params: "TransceiverParams | dict[str, np.ndarray]") -> None:
    """Write named float64 tensors: magic, version, then one record per
    tensor (name length, name bytes, rank, dims, little-endian payload)."""
    if isinstance(params, TransceiverParams):
        items = [(n, t.data) for n, t in params.items()]
    else:
        items = list(params.items())
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name, arr in items:
            arr = np.asarray(arr, dtype="<f8")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into a name -> float64 array map."""
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a transceiver checkpoint (bad magic {blob[:4]!r})")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    offset = 8
    state: dict[str, np.ndarray] = {}

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(blob):
            raise ConfigError(f"{path} is truncated at byte {offset}")
        piece = blob[offset : offset + count]
        offset += count
        return piece

    while offset < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims)
        state[name] = data.astype(np.float64)
    return state


# -- forward passes --------------------------------------------------------


def power_normalize(raw: Tensor, floor: float = POWER_FLOOR) -> SymbolStream:
    """Scale a raw (B, M, 2) symbol Tensor to unit batch-mean symbol power.

    The scale is 1/sqrt(max(mean_power, floor)) and stays inside the
    autodiff graph, so gradients flow through the normalization.  An
    all-zero batch passes through unchanged (the floor prevents a blowup).
    """
    if raw.ndim != 3 or raw.shape[-1] != 2:
        raise ConfigError(f"symbol stream must be (B, M, 2), got {raw.shape}")
    n_symbols = raw.shape[0] * raw.shape[1]
    mean_power = (raw * raw).sum() / float(n_symbols)
    scale = maximum(mean_power, floor) ** -0.5
    symbols = raw * scale
    measured = float(np.sum(symbols.data**2) / n_symbols)
    return SymbolStream(symbols=symbols, mean_power=measured)


def _dense(x: Tensor, params, name: str) -> Tensor:
    return matmul(x, params[f"{name}/weight"]) + params[f"{name}/bias"]


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    b, length, dim = x.shape
    return x.reshape(b, length, num_heads, dim // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: Tensor) -> Tensor:
    b, heads, length, depth = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, length, heads * depth)


def _attention(params, name: str, query: Tensor, keys: Tensor, num_heads: int, bias: np.ndarray | None) -> Tensor:
    """Multi-head scaled dot-product attention.

    ``bias`` is an optional additive (B or 1, 1, Lq, Lk) mask of 0 /
    MASK_BIAS entries applied to the score matrix before the softmax.
    """
    q = _split_heads(_dense(query, params, f"{name}/q"), num_heads)
    k = _split_heads(matmul(keys, params[f"{name}/k/weight"]), num_heads)
    v = _split_heads(_dense(keys, params, f"{name}/v"), num_heads)
    depth = q.shape[-1]
    scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(depth))
    if bias is not None:
        scores = scores + Tensor(bias)
    weights = softmax(scores, axis=-1)
    context = _merge_heads(matmul(weights, v))
    return _dense(context, params, f"{name}/out")


def _key_pad_bias(pad_mask: np.ndarray) -> np.ndarray:
    """(B, L) pad flags -> (B, 1, 1, L) additive bias.

    Rows where every key is padding fall back to attending the first slot
    (the START position) so the softmax stays well-defined.
    """
    bias = np.where(pad_mask, MASK_BIAS, 0.0)
    dead = pad_mask.all(axis=-1)
    if dead.any():
        bias[dead, 0] = 0.0
    return bias[:, None, None, :]


def _causal_bias(length: int) -> np.ndarray:
    """(1, 1, L, L) additive bias hiding future positions."""
    upper = np.triu(np.full((length, length), MASK_BIAS), k=1)
    return upper[None, None, :, :]


class Transceiver:
    """Configuration plus parameters, with one method per pipeline stage."""

    def __init__(self, cfg: ShapeConfig, params: TransceiverParams):
        self.cfg = cfg
        self.params = params
        self._positions = sinusoid_table(cfg.max_len, cfg.embed_dim)
        self._embed_scale = float(np.sqrt(cfg.embed_dim))

    @classmethod
    def init(cls, cfg: ShapeConfig, seed) -> "Transceiver":
        return cls(cfg, TransceiverParams.init(cfg, seed))

    @classmethod
    def from_checkpoint(cls, cfg: ShapeConfig, path: str | Path) -> "Transceiver":
        model = cls.init(cfg, seed=0)
        model.params.load_state(load_checkpoint(path))
        return model

    # -- transmit side ----------------------------------------------------

    def semantic_encode(self, batch: TokenBatch) -> Tensor:
        """Token ids -> (B, L, E) contextual feature vectors."""
        cfg, params = self.cfg, self.params
        ids = batch.ids
        if ids.shape[1] != cfg.max_len:
            raise ConfigError(f"batch length {ids.shape[1]} != configured max_len {cfg.max_len}")
        if ids.max(initial=0) >= cfg.vocab_size:
            raise ConfigError(
                f"token id {int(ids.max())} outside configured vocab_size {cfg.vocab_size}"
            )
        h = embedding(params["semantic_encoder/embed"], ids) * self._embed_scale
        h = h + Tensor(self._positions[None, : ids.shape[1]])
        bias = _key_pad_bias(batch.pad_mask)
        for i in range(cfg.num_layers):
            base = f"semantic_encoder/layer{i}"
            attended = _attention(params, f"{base}/self_attn", h, h, cfg.num_heads, bias)
            h = layer_norm(h + attended, params[f"{base}/norm_attn/gain"], params[f"{base}/norm_attn/bias"])
            ff = _dense(relu(_dense(h, params, f"{base}/ffn/in")), params, f"{base}/ffn/out")
            h = layer_norm(h + ff, params[f"{base}/norm_ffn/gain"], params[f"{base}/norm_ffn/bias"])
        return h

    def channel_encode(self, features: Tensor) -> SymbolStream:
        """(B, L, E) features -> normalized (B, L*C, 2) symbol stream."""
        cfg = self.cfg
        per_token = _dense(features, self.params, "channel_encoder")
        raw = per_token.reshape(features.shape[0], cfg.stream_len, 2)
        return power_normalize(raw)

    # -- receive side -----------------------------------------------------

    def channel_decode(self, received: Tensor) -> Tensor:
        """(B, L*C, 2) received symbols -> (B, L, feature_dim) vectors."""
        cfg = self.cfg
        if received.shape[1:] != (cfg.stream_len, 2):
            raise ConfigError(
                f"received stream shape {received.shape} != (B, {cfg.stream_len}, 2)"
            )
        stacked = received.reshape(received.shape[0], cfg.max_len, 2 * cfg.symbols_per_token)
        return _dense(stacked, self.params, "channel_decoder")

    def semantic_decode(self, features: Tensor, prefix_ids: np.ndarray) -> Tensor:
        """Teacher-forced decoder pass.

        ``prefix_ids`` (B, Lp) feeds causal self-attention; position t of the
        returned (B, Lp, V) logits predicts the token following prefix slot t.
        Cross-attention reads all ``max_len`` received feature slots.
        """
        cfg, params = self.cfg, self.params
        prefix_ids = np.asarray(prefix_ids, dtype=np.int64)
        b, lp = prefix_ids.shape
        h = embedding(params["semantic_decoder/embed"], prefix_ids) * self._embed_scale
        h = h + Tensor(self._positions[None, :lp])
        self_bias = _causal_bias(lp) + _key_pad_bias(prefix_ids == PAD_ID)
        for i in range(cfg.num_layers):
            base = f"semantic_decoder/layer{i}"
            attended = _attention(params, f"{base}/self_attn", h, h, cfg.num_heads, self_bias)
            h = layer_norm(h + attended, params[f"{base}/norm_self/gain"], params[f"{base}/norm_self/bias"])
            crossed = _attention(params, f"{base}/cross_attn", h, features, cfg.num_heads, None)
            h = layer_norm(h + crossed, params[f"{base}/norm_cross/gain"], params[f"{base}/norm_cross/bias"])
            ff = _dense(relu(_dense(h, params, f"{base}/ffn/in")), params, f"{base}/ffn/out")
            h = layer_norm(h + ff, params[f"{base}/norm_ffn/gain"], params[f"{base}/norm_ffn/bias"])
        return _dense(h, params, "semantic_decoder/out")

    def greedy_decode(self, features: Tensor, max_len: int | None = None) -> TokenBatch:
        """Deterministic argmax decoding.

        Rows start at START, stop at the first END (ties in the argmax go to
        the lowest id), and are forced to END in the final slot if the model
        never terminates.  PAD and START are never emitted, so the result
        satisfies the TokenBatch layout invariants.
        """
        if max_len is None:
            max_len = self.cfg.max_len
        if max_len < 2:
            raise ConfigError(f"greedy decoding needs max_len >= 2, got {max_len}")
        features = features.detach()
        b = features.shape[0]
        rows = np.full((b, max_len), PAD_ID, dtype=np.int64)
        rows[:, 0] = START_ID
        alive = np.ones(b, dtype=bool)
        for t in range(1, max_len):
            if not alive.any():
                break
            logits = self.semantic_decode(features, rows[:, :t])
            last = logits.data[:, -1, :].copy()
            last[:, PAD_ID] = -np.inf
            last[:, START_ID] = -np.inf
            nxt = np.argmax(last, axis=-1)
            if t == max_len - 1:
                nxt = np.full(b, END_ID, dtype=np.int64)
            rows[alive, t] = nxt[alive]
            alive = alive & (nxt != END_ID)
        return TokenBatch.from_ids(rows)
