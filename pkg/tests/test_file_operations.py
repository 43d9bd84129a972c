import csv

from core.trainer import EpochRecord
from core.trees import SPNode, canonicalize, pad_eob, trees_equal
from corpus.instances import TrainingInstance, format_instance
from corpus.vocabulary import EOB_ID
from utils.file_operations import FileManager


class TestFileManager:
    def test_output_directory_is_created(self, tmp_path):
        files = FileManager(str(tmp_path / "run"))
        assert (tmp_path / "run").is_dir()
        assert files.path("model.ckpt") == str(tmp_path / "run" / "model.ckpt")

    def test_write_creates_parents(self, tmp_path):
        files = FileManager()
        path = str(tmp_path / "a" / "b.txt")
        files.write_file(path, "x\n")
        assert files.file_exists(path)
        assert files.read_file(path) == "x\n"

    def test_tree_file(self, tmp_path):
        files = FileManager()
        trees = [pad_eob(canonicalize(SPNode("b", 1, [SPNode("a"), SPNode("c")]))),
                 pad_eob(canonicalize(SPNode("z")))]
        path = str(tmp_path / "trees.txt")
        assert files.write_trees(path, trees) == 2
        assert all(trees_equal(a, b) for a, b in zip(files.read_trees(path), trees))

    def test_instance_file(self, tmp_path):
        files = FileManager()
        instances = [TrainingInstance([2, 3], pad_eob(canonicalize(SPNode(4)), EOB_ID))]
        path = str(tmp_path / "instances.txt")
        files.write_instances(path, instances)
        back = files.read_instances(path)
        assert [format_instance(i) for i in back] == [format_instance(i) for i in instances]

    def test_history_file(self, tmp_path):
        files = FileManager()
        path = str(tmp_path / "history.csv")
        files.write_history(path, [EpochRecord(1, 3.25, 12.5), EpochRecord(2, 2.0, 9.75)])
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        assert rows == [
            ["epoch", "train_nll", "validation_perplexity"],
            ["1", "3.25", "12.5"],
            ["2", "2.0", "9.75"],
        ]
