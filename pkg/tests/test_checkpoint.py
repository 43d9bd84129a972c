import io

import numpy as np
import pytest

from core.checkpoint import MAGIC, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint
from core.errors import ModelError
from corpus.vocabulary import UNK, Vocabulary


@pytest.fixture
def vocabulary():
    return Vocabulary(["<eob>", UNK] + [f"w{i}" for i in range(6)])


class TestCheckpoint:
    def test_save_and_load(self, tmp_path, make_model, vocabulary):
        model = make_model(seed=4)
        path = str(tmp_path / "nested" / "model.ckpt")
        save_checkpoint(path, model, vocabulary)
        loaded, loaded_vocabulary = load_checkpoint(path, vocabulary.sha1())
        assert loaded.dims == model.dims
        assert loaded_vocabulary.tokens == vocabulary.tokens
        for name, value in model.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_starts_with_magic(self, make_model, vocabulary):
        stream = io.BytesIO()
        write_checkpoint(stream, make_model(), vocabulary)
        assert stream.getvalue()[:4] == MAGIC

    def test_bad_magic(self):
        with pytest.raises(ModelError, match="magic"):
            read_checkpoint(io.BytesIO(b"NOPE" + bytes(20)))

    def test_truncated_blocks(self, make_model, vocabulary):
        stream = io.BytesIO()
        write_checkpoint(stream, make_model(), vocabulary)
        with pytest.raises(ModelError, match="truncated"):
            read_checkpoint(io.BytesIO(stream.getvalue()[:-8]))

    def test_trailing_bytes(self, make_model, vocabulary):
        stream = io.BytesIO()
        write_checkpoint(stream, make_model(), vocabulary)
        with pytest.raises(ModelError, match="trailing"):
            read_checkpoint(io.BytesIO(stream.getvalue() + b"\0"))

    def test_vocabulary_hash_mismatch(self, make_model, vocabulary):
        stream = io.BytesIO()
        write_checkpoint(stream, make_model(), vocabulary)
        other = Vocabulary(["<eob>", UNK] + [f"v{i}" for i in range(6)])
        with pytest.raises(ModelError, match="different vocabulary"):
            read_checkpoint(io.BytesIO(stream.getvalue()), other.sha1())

    def test_vocabulary_size_must_match_model(self, make_model):
        with pytest.raises(ModelError):
            write_checkpoint(io.BytesIO(), make_model(), Vocabulary(["<eob>", UNK, "a"]))
