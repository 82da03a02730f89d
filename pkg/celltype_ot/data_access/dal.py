from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Sequence

from celltype_ot.data_access.dataset import Dataset
from celltype_ot.data_access.report import AnalysisReport


class DataAccessLayer(ABC):
    """
    Abstract Base Class for a Data Access Layer.
    Defines the contract for every artifact the pipeline reads or writes, so
    the orchestration logic can run against files on disk or an in-memory
    stand-in through a consistent interface.
    """

    @abstractmethod
    def load_dataset(self, path: Path) -> Dataset:
        """Parses a cell-level dataset file."""
        pass

    @abstractmethod
    def save_report(self, report: AnalysisReport, path: Path) -> None:
        """Writes an analysis report."""
        pass

    @abstractmethod
    def save_heatmap(self, svg: str, path: Path) -> None:
        """Writes one rendered SVG figure (plan heatmap or W-series plot)."""
        pass

    @abstractmethod
    def save_simulated_dataset(
        self,
        time_index: Sequence[int],
        cell_types: Sequence[str],
        features: Any,
        path: Path,
    ) -> None:
        """Writes simulated cells in the dataset file format."""
        pass

    @abstractmethod
    def save_truth(self, truth: Dict[str, Any], path: Path) -> None:
        """Writes the ground-truth sidecar of a simulation."""
        pass

    @abstractmethod
    def save_benchmark(self, report: Dict[str, Any], path: Path) -> None:
        """Writes a Monte Carlo benchmark report."""
        pass

    @abstractmethod
    def load_index_set(self, path: Path) -> set:
        """
        Loads a set of time indices for evaluation.

        Args:
            path: A JSON list, or a JSON object holding `change_times` or
                `change_points`.

        Returns:
            The indices as a set of ints.
        """
        pass
