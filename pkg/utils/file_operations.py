"""
File operations for TreeReply
"""

import csv
import os
from typing import Iterable, List, Optional

from core.tree_format import format_ternary, parse_ternary
from core.trees import EOB, TernaryNode
from corpus.instances import TrainingInstance, format_instance, parse_instance

HISTORY_COLUMNS = ["epoch", "train_nll", "validation_perplexity"]


class FileManager:
    """Handles file I/O for tree files, instance files and training history"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir
        if output_dir:
            os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        """Path of `name` inside the output directory"""
        return os.path.join(self.output_dir or ".", name)

    def _ensure_parent(self, file_path: str):
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    def read_file(self, file_path: str) -> str:
        """Read content from file"""
        with open(file_path, "r", encoding="utf-8") as f:
            return f.read()

    def write_file(self, file_path: str, content: str):
        """Write content to file"""
        self._ensure_parent(file_path)
        with open(file_path, "w", encoding="utf-8") as f:
            f.write(content)

    def file_exists(self, file_path: str) -> bool:
        """Check if file exists"""
        return os.path.exists(file_path)

    def write_trees(self, file_path: str, trees: Iterable[TernaryNode]) -> int:
        """One padded ternary tree per line; returns the number written"""
        lines = [format_ternary(tree, EOB) for tree in trees]
        self.write_file(file_path, "".join(line + "\n" for line in lines))
        return len(lines)

    def read_trees(self, file_path: str) -> List[TernaryNode]:
        """Trees of a tree file, skipping blank lines"""
        return [parse_ternary(line) for line in self.read_file(file_path).splitlines() if line.strip()]

    def write_instances(self, file_path: str, instances: Iterable[TrainingInstance]) -> int:
        lines = [format_instance(instance) for instance in instances]
        self.write_file(file_path, "".join(line + "\n" for line in lines))
        return len(lines)

    def read_instances(self, file_path: str) -> List[TrainingInstance]:
        return [parse_instance(line) for line in self.read_file(file_path).splitlines() if line.strip()]

    def write_history(self, file_path: str, records) -> int:
        """Per-epoch CSV: epoch, train NLL, validation perplexity"""
        self._ensure_parent(file_path)
        with open(file_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(HISTORY_COLUMNS)
            for record in records:
                writer.writerow([record.epoch, repr(float(record.train_nll)), repr(float(record.validation_perplexity))])
        return len(records)
