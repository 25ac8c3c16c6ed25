from .metrics import MetricReport, evaluate, read_reports, write_reports
from .model import TaskModel, TaskSpec, load_checkpoint, save_checkpoint, task_loss, total_objective
from .tasks import LinkTask, NodeTask, TimeAxis, TrafficTask
from .train import EpochRecord, TrainConfig, TrainingDiverged, TrainResult, train, write_epoch_log

__all__ = [
    "EpochRecord",
    "LinkTask",
    "MetricReport",
    "NodeTask",
    "TaskModel",
    "TaskSpec",
    "TimeAxis",
    "TrafficTask",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "evaluate",
    "load_checkpoint",
    "read_reports",
    "save_checkpoint",
    "task_loss",
    "total_objective",
    "train",
    "write_epoch_log",
    "write_reports",
]
