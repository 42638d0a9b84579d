"""Transceiver networks: shapes, masking, checkpoints, end-to-end gradients."""

import numpy as np
import pytest

from ris_semcom.autodiff import Tensor, finite_diff_check, softmax
from ris_semcom.channel import NoiseModel, apply_channel, derotate
from ris_semcom.errors import ConfigError
from ris_semcom.metrics import LossInputs, cross_entropy_loss
from ris_semcom.model import (
    ShapeConfig,
    Transceiver,
    TransceiverParams,
    load_checkpoint,
    power_normalize,
    save_checkpoint,
    sinusoid_table,
)
from ris_semcom.text import END_ID, PAD_ID, START_ID, TokenBatch

TINY = ShapeConfig(
    vocab_size=9,
    max_len=5,
    embed_dim=8,
    num_heads=2,
    num_layers=1,
    ffn_width=12,
    symbols_per_token=3,
    feature_dim=8,
    batch_size=4,
)


def tiny_batch(rows=None) -> TokenBatch:
    if rows is None:
        rows = [
            [START_ID, 4, 5, END_ID, PAD_ID],
            [START_ID, 6, 7, 8, END_ID],
            [START_ID, 4, END_ID, PAD_ID, PAD_ID],
        ]
    return TokenBatch.from_ids(np.array(rows, dtype=np.int64))


# -- configuration ---------------------------------------------------------


def test_shape_config_stream_len():
    assert TINY.stream_len == 15
    assert ShapeConfig(vocab_size=100).stream_len == 22 * 8


def test_shape_config_validation():
    with pytest.raises(ConfigError):
        ShapeConfig(vocab_size=9, embed_dim=10, num_heads=4)
    with pytest.raises(ConfigError):
        ShapeConfig(vocab_size=4)
    with pytest.raises(ConfigError):
        ShapeConfig(vocab_size=9, max_len=2)
    with pytest.raises(ConfigError):
        ShapeConfig(vocab_size=9, num_layers=0)


def test_sinusoid_table_layout():
    table = sinusoid_table(6, 8)
    assert table.shape == (6, 8)
    np.testing.assert_allclose(table[0, 0::2], 0.0, atol=1e-15)  # sin(0)
    np.testing.assert_allclose(table[0, 1::2], 1.0, atol=1e-15)  # cos(0)
    assert np.all(np.abs(table) <= 1.0)
    assert not np.array_equal(table[1], table[2])


# -- parameters ------------------------------------------------------------


def test_params_init_is_seed_deterministic():
    a = TransceiverParams.init(TINY, seed=5)
    b = TransceiverParams.init(TINY, seed=5)
    assert a.names() == b.names()
    for name in a.names():
        np.testing.assert_array_equal(a[name].data, b[name].data)
    c = TransceiverParams.init(TINY, seed=6)
    assert any(not np.array_equal(a[n].data, c[n].data) for n in a.names())


def test_params_group_partition_covers_everything():
    params = TransceiverParams.init(TINY, seed=0)
    grouped = set()
    for prefix in TransceiverParams.GROUPS:
        grouped |= set(params.group(prefix))
    assert grouped == set(params.names())


def test_params_all_require_grad_and_are_named():
    params = TransceiverParams.init(TINY, seed=0)
    for name, tensor in params.items():
        assert tensor.requires_grad
        assert tensor.name == name


def test_copy_and_load_state_round_trip():
    params = TransceiverParams.init(TINY, seed=1)
    state = params.copy_state()
    for t in params.tensors():
        t.data = t.data + 1.0
    params.load_state(state)
    for name in params.names():
        np.testing.assert_array_equal(params[name].data, state[name])


def test_load_state_rejects_name_and_shape_mismatches():
    params = TransceiverParams.init(TINY, seed=1)
    state = params.copy_state()
    bad = dict(state)
    bad.pop(sorted(bad)[0])
    with pytest.raises(ConfigError):
        params.load_state(bad)
    bad = dict(state)
    first = sorted(bad)[0]
    bad[first] = np.zeros((1, 1))
    with pytest.raises(ConfigError):
        params.load_state(bad)


# -- checkpoint format -----------------------------------------------------


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    params = TransceiverParams.init(TINY, seed=2)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    state = load_checkpoint(path)
    assert list(state) == params.names()  # record order preserved
    for name in params.names():
        np.testing.assert_array_equal(state[name], params[name].data)


def test_checkpoint_files_are_byte_identical_for_equal_params(tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, TransceiverParams.init(TINY, seed=3))
    save_checkpoint(b, TransceiverParams.init(TINY, seed=3))
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_handles_scalar_and_high_rank_tensors(tmp_path):
    state = {"s": np.array(3.5), "m": np.arange(24.0).reshape(2, 3, 4)}
    path = tmp_path / "mixed.ckpt"
    save_checkpoint(path, state)
    back = load_checkpoint(path)
    assert back["s"].shape == ()
    assert float(back["s"]) == 3.5
    np.testing.assert_array_equal(back["m"], state["m"])


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation(tmp_path):
    params = TransceiverParams.init(TINY, seed=4)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 5])
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_from_checkpoint_reproduces_forward_pass(tmp_path):
    model = Transceiver.init(TINY, seed=8)
    batch = tiny_batch()
    want = model.semantic_encode(batch).data
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, model.params)
    clone = Transceiver.from_checkpoint(TINY, path)
    np.testing.assert_array_equal(clone.semantic_encode(batch).data, want)


# -- power normalization ---------------------------------------------------


def test_power_normalize_gives_unit_mean_power():
    raw = Tensor(np.random.default_rng(0).normal(size=(4, 10, 2)) * 3.0)
    stream = power_normalize(raw)
    measured = np.mean(np.sum(stream.symbols.data**2, axis=-1))
    assert abs(measured - 1.0) < 1e-9
    assert abs(stream.mean_power - 1.0) < 1e-9


def test_power_normalize_never_exceeds_unit_power():
    for seed in range(5):
        raw = Tensor(np.random.default_rng(seed).normal(size=(2, 7, 2)) * (seed + 0.1))
        stream = power_normalize(raw)
        assert stream.mean_power <= 1.0 + 1e-9


def test_power_normalize_zero_batch_passes_through():
    stream = power_normalize(Tensor(np.zeros((2, 3, 2))))
    np.testing.assert_array_equal(stream.symbols.data, np.zeros((2, 3, 2)))
    assert stream.mean_power == 0.0


def test_power_normalize_shape_check():
    with pytest.raises(ConfigError):
        power_normalize(Tensor(np.zeros((2, 3))))


def test_power_normalize_gradient_flows_through_scale():
    raw = Tensor(np.random.default_rng(1).normal(size=(2, 4, 2)), requires_grad=True)

    def f():
        stream = power_normalize(raw)
        return (stream.symbols * np.arange(16.0).reshape(2, 4, 2)).sum()

    assert finite_diff_check(f, [raw]) <= 1e-6


# -- encoder ---------------------------------------------------------------


def test_semantic_encode_shape_and_determinism():
    model = Transceiver.init(TINY, seed=9)
    batch = tiny_batch()
    out = model.semantic_encode(batch)
    assert out.shape == (3, TINY.max_len, TINY.embed_dim)
    np.testing.assert_array_equal(out.data, model.semantic_encode(batch).data)


def test_semantic_encode_rejects_wrong_length_and_vocab():
    model = Transceiver.init(TINY, seed=9)
    with pytest.raises(ConfigError):
        model.semantic_encode(TokenBatch.from_ids(np.zeros((2, 4), dtype=np.int64)))
    rows = np.zeros((1, TINY.max_len), dtype=np.int64)
    rows[0, 0] = TINY.vocab_size
    with pytest.raises(ConfigError):
        model.semantic_encode(TokenBatch.from_ids(rows))


def test_semantic_encode_all_pad_row_stays_finite():
    model = Transceiver.init(TINY, seed=10)
    batch = TokenBatch.from_ids(np.zeros((2, TINY.max_len), dtype=np.int64))
    out = model.semantic_encode(batch)
    assert np.all(np.isfinite(out.data))


def test_semantic_encode_is_batch_equivariant():
    model = Transceiver.init(TINY, seed=11)
    batch = tiny_batch()
    out = model.semantic_encode(batch).data
    perm = [2, 0, 1]
    shuffled = TokenBatch.from_ids(batch.ids[perm])
    out_perm = model.semantic_encode(shuffled).data
    np.testing.assert_allclose(out_perm, out[perm], atol=1e-12)


def test_pad_keys_do_not_influence_other_positions():
    model = Transceiver.init(TINY, seed=12)
    a = tiny_batch([[START_ID, 4, END_ID, PAD_ID, PAD_ID]])
    out_a = model.semantic_encode(a).data
    # change nothing except that the pad slots carry different (still PAD) ids:
    # impossible by construction, so instead compare against a longer batch
    # where the same sentence appears next to a different one
    b = tiny_batch([[START_ID, 4, END_ID, PAD_ID, PAD_ID], [START_ID, 8, 8, 8, END_ID]])
    out_b = model.semantic_encode(b).data
    np.testing.assert_allclose(out_b[0], out_a[0], atol=1e-12)


# -- channel encoder / decoder ---------------------------------------------


def test_channel_encode_shape_and_unit_power():
    model = Transceiver.init(TINY, seed=13)
    stream = model.channel_encode(model.semantic_encode(tiny_batch()))
    assert stream.symbols.shape == (3, TINY.stream_len, 2)
    assert abs(stream.mean_power - 1.0) < 1e-9


def test_channel_decode_shape_and_zero_maps_to_bias():
    model = Transceiver.init(TINY, seed=14)
    received = Tensor(np.zeros((2, TINY.stream_len, 2)))
    out = model.channel_decode(received)
    assert out.shape == (2, TINY.max_len, TINY.feature_dim)
    bias = model.params["channel_decoder/bias"].data
    np.testing.assert_allclose(out.data, np.broadcast_to(bias, out.shape), atol=1e-15)


def test_channel_decode_rejects_wrong_stream_shape():
    model = Transceiver.init(TINY, seed=14)
    with pytest.raises(ConfigError):
        model.channel_decode(Tensor(np.zeros((2, TINY.stream_len + 1, 2))))


# -- decoder ---------------------------------------------------------------


def make_features(model, seed=15):
    rng = np.random.default_rng(seed)
    return Tensor(rng.normal(size=(2, model.cfg.max_len, model.cfg.feature_dim)))


def test_semantic_decode_logit_shape():
    model = Transceiver.init(TINY, seed=16)
    features = make_features(model)
    prefix = np.array([[START_ID, 4, 5], [START_ID, 6, 7]])
    logits = model.semantic_decode(features, prefix)
    assert logits.shape == (2, 3, TINY.vocab_size)


def test_causal_mask_is_bit_exact():
    model = Transceiver.init(TINY, seed=17)
    features = make_features(model)
    a = np.array([[START_ID, 4, 5, 6], [START_ID, 7, 8, 4]])
    b = a.copy()
    b[:, -1] = [8, 5]  # change only the last prefix slot
    la = model.semantic_decode(features, a).data
    lb = model.semantic_decode(features, b).data
    np.testing.assert_array_equal(la[:, :-1, :], lb[:, :-1, :])
    assert not np.array_equal(la[:, -1, :], lb[:, -1, :])


def test_prefix_growth_preserves_earlier_logits():
    model = Transceiver.init(TINY, seed=18)
    features = make_features(model)
    short = np.array([[START_ID, 4]])
    longer = np.array([[START_ID, 4, 7, 8]])
    ls = model.semantic_decode(features, short).data
    ll = model.semantic_decode(features, longer).data
    np.testing.assert_array_equal(ll[:, :2, :], ls)


def test_features_reach_the_decoder():
    model = Transceiver.init(TINY, seed=19)
    prefix = np.array([[START_ID, 4, 5]])
    la = model.semantic_decode(make_features(model, 20), prefix).data
    lb = model.semantic_decode(make_features(model, 21), prefix).data
    assert not np.array_equal(la, lb)


# -- greedy decoding -------------------------------------------------------


def greedy_invariants(batch: TokenBatch):
    for row in batch.ids:
        assert row[0] == START_ID
        assert np.sum(row == END_ID) == 1
        end = int(np.argmax(row == END_ID))
        assert np.all(row[end + 1 :] == PAD_ID)
        assert np.all(row[1:end] != PAD_ID)
        assert np.all(row[1:] != START_ID)


def test_greedy_decode_contracts_hold_for_random_models():
    for seed in range(4):
        model = Transceiver.init(TINY, seed=seed)
        out = model.greedy_decode(make_features(model, 30 + seed))
        assert out.ids.shape == (2, TINY.max_len)
        greedy_invariants(out)


def test_greedy_decode_is_deterministic():
    model = Transceiver.init(TINY, seed=22)
    features = make_features(model, 40)
    a = model.greedy_decode(features)
    b = model.greedy_decode(features)
    np.testing.assert_array_equal(a.ids, b.ids)


def test_greedy_decode_needs_room_for_start_and_end():
    model = Transceiver.init(TINY, seed=23)
    with pytest.raises(ConfigError):
        model.greedy_decode(make_features(model), max_len=1)


# -- full pipeline gradient ------------------------------------------------


def test_every_parameter_has_a_correct_gradient_through_the_pipeline():
    model = Transceiver.init(TINY, seed=24)
    batch = tiny_batch()
    prefix = batch.ids[:, :-1]
    targets = batch.ids[:, 1:]
    pad = targets == PAD_ID
    gain = np.asarray(0.7 - 0.4j)

    def f():
        features = model.semantic_encode(batch)
        stream = model.channel_encode(features)
        received = apply_channel(stream.symbols, gain, NoiseModel(0.05), seed=7)
        received = derotate(received, np.angle(gain))
        decoded = model.channel_decode(received)
        logits = model.semantic_decode(decoded, prefix)
        probs = softmax(logits, axis=-1)
        return cross_entropy_loss(LossInputs(probs, targets, pad))

    err = finite_diff_check(f, model.params.tensors(), max_coordinates=2, seed=3)
    assert err <= 1e-4, f"worst relative gradient error {err}"
