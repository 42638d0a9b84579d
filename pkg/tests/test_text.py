"""Tokenization, vocabulary construction, and id-batch plumbing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ris_semcom.text import (
    END_ID,
    PAD_ID,
    RESERVED_TOKENS,
    START_ID,
    UNK_ID,
    TokenBatch,
    Vocabulary,
    build_vocab,
    decode_ids,
    encode_corpus,
    encode_sentence,
    length_filter,
    load_corpus,
    make_batches,
    strip_special_ids,
    tokenize,
)


def test_reserved_ids_are_the_first_four():
    assert (PAD_ID, START_ID, END_ID, UNK_ID) == (0, 1, 2, 3)


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("The House adjourned.") == ["the", "house", "adjourned", "."]


def test_tokenize_separates_bracketed_words():
    # a literal "<pad>" in running text can never produce the reserved token
    assert tokenize("<pad>") == ["<", "pad", ">"]


def test_tokenize_empty_string():
    assert tokenize("   ") == []


def test_tokenize_keeps_digits_and_apostrophes_apart():
    assert tokenize("it's 42") == ["it", "'", "s", "42"]


def test_build_vocab_orders_by_frequency_then_token():
    vocab = build_vocab(["b b a a c"])
    # a and b tie at 2 (lexicographic break), then c
    assert vocab.id_for("a") == 4
    assert vocab.id_for("b") == 5
    assert vocab.id_for("c") == 6
    assert vocab.size == 7


def test_build_vocab_min_freq_drops_rare_tokens():
    vocab = build_vocab(["x x y"], min_freq=2)
    assert "x" in vocab
    assert "y" not in vocab
    assert vocab.id_for("y") == UNK_ID


def test_build_vocab_max_size_truncates_after_ranking():
    vocab = build_vocab(["a a a b b c"], max_size=2)
    assert vocab.size == 6  # 4 reserved + 2 kept
    assert "a" in vocab and "b" in vocab and "c" not in vocab


def test_vocab_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(["x", "x"])


def test_vocab_save_load_round_trip(tmp_path):
    vocab = build_vocab(["alpha beta beta gamma"])
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.id_to_token == vocab.id_to_token


def test_vocab_file_line_number_is_the_id(tmp_path):
    vocab = build_vocab(["q r s"])
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    lines = path.read_text().splitlines()
    assert tuple(lines[:4]) == RESERVED_TOKENS
    for idx, token in enumerate(lines):
        assert vocab.id_for(token) == idx


def test_vocab_load_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("foo\nbar\n")
    with pytest.raises(ValueError):
        Vocabulary.load(path)


def test_length_filter_bounds_are_inclusive():
    sentences = ["a b c", "a b c d", "a " * 30, "a " * 31]
    kept = length_filter(sentences, min_words=4, max_words=30)
    assert kept == ["a b c d", ("a " * 30).strip() + " "]


def test_length_filter_counts_punctuation_as_tokens():
    assert length_filter(["one two three ."], min_words=4, max_words=4) == ["one two three ."]


def test_encode_sentence_layout():
    vocab = build_vocab(["cat sat"])
    row = encode_sentence("cat sat", vocab, max_len=6)
    assert row.tolist() == [START_ID, vocab.id_for("cat"), vocab.id_for("sat"), END_ID, PAD_ID, PAD_ID]


def test_encode_sentence_unknown_word_becomes_unk():
    vocab = build_vocab(["cat"])
    row = encode_sentence("dog", vocab, max_len=4)
    assert row.tolist() == [START_ID, UNK_ID, END_ID, PAD_ID]


def test_encode_sentence_exact_fit_has_no_padding():
    vocab = build_vocab(["a b"])
    row = encode_sentence("a b", vocab, max_len=4)
    assert row.tolist() == [START_ID, vocab.id_for("a"), vocab.id_for("b"), END_ID]


def test_encode_sentence_overflow_raises():
    vocab = build_vocab(["a"])
    with pytest.raises(ValueError):
        encode_sentence("a a a", vocab, max_len=4)


def test_encode_decode_round_trip():
    text = "the committee approved the proposal ."
    vocab = build_vocab([text])
    row = encode_sentence(text, vocab, max_len=10)
    assert decode_ids(row, vocab) == tokenize(text)


def test_encode_corpus_shape_and_empty():
    vocab = build_vocab(["a b"])
    mat = encode_corpus(["a", "b", "a b"], vocab, max_len=5)
    assert mat.shape == (3, 5)
    assert encode_corpus([], vocab, max_len=5).shape == (0, 5)


def test_strip_special_ids_keeps_unk():
    assert strip_special_ids([START_ID, 7, UNK_ID, 9, END_ID, PAD_ID]) == [7, UNK_ID, 9]


def test_token_batch_masks_and_lengths():
    ids = np.array([[START_ID, 5, END_ID, PAD_ID], [START_ID, 5, 6, END_ID]])
    batch = TokenBatch.from_ids(ids)
    assert batch.pad_mask.tolist() == [[False, False, False, True], [False] * 4]
    assert batch.lengths.tolist() == [3, 4]
    assert batch.batch_size == 2 and batch.max_len == 4


def test_token_batch_rejects_wrong_rank():
    with pytest.raises(ValueError):
        TokenBatch.from_ids(np.zeros(4, dtype=np.int64))


def test_make_batches_partitions_every_row_once():
    encoded = np.arange(22 * 3).reshape(22, 3)
    batches = list(make_batches(encoded, batch_size=8, shuffle_seed=11))
    assert [b.batch_size for b in batches] == [8, 8, 6]
    seen = np.concatenate([b.ids for b in batches])
    np.testing.assert_array_equal(np.sort(seen[:, 0]), np.sort(encoded[:, 0]))


def test_make_batches_seed_reproducible_and_seedless_in_order():
    encoded = np.arange(10 * 2).reshape(10, 2)
    a = [b.ids for b in make_batches(encoded, 4, shuffle_seed=3)]
    b = [b.ids for b in make_batches(encoded, 4, shuffle_seed=3)]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    plain = np.concatenate([b.ids for b in make_batches(encoded, 4)])
    np.testing.assert_array_equal(plain, encoded)


def test_make_batches_rejects_bad_batch_size():
    with pytest.raises(ValueError):
        list(make_batches(np.zeros((3, 2), dtype=np.int64), 0))


def test_load_corpus_skips_blank_lines(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("first line\n\n  \nsecond line\n", encoding="utf-8")
    assert load_corpus(path) == ["first line", "second line"]


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet=st.characters(codec="ascii"), max_size=80))
def test_tokenize_never_emits_whitespace_or_empty(text):
    for token in tokenize(text):
        assert token
        assert not any(c.isspace() for c in token)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["cat", "dog", "ran", "sat", "."]), min_size=1, max_size=8))
def test_known_word_round_trip_property(words):
    vocab = build_vocab(["cat dog ran sat ."])
    text = " ".join(words)
    row = encode_sentence(text, vocab, max_len=10)
    assert decode_ids(row, vocab) == words
    assert row[0] == START_ID
    assert np.sum(row == END_ID) == 1
