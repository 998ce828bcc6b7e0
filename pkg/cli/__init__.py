from cli.commands import main
from cli.experiment import ExperimentRunner

__all__ = ["main", "ExperimentRunner"]
