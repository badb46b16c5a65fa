"""Training loop, run report, and evaluation helpers."""

import csv
import json
from dataclasses import asdict, dataclass, field

import torch
from torch.utils.data import DataLoader

from .data import FrameDataset, decode_depth
from .losses import DEFAULT_WEIGHTS, DepthLoss

THRESHOLD_RATIO = 1.25


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    lr: float = 1e-3
    weights: tuple = DEFAULT_WEIGHTS
    plateau_factor: float = 0.5
    plateau_patience: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class EpochRecord:
    stage: int
    stage_name: str
    epoch: int
    train_loss: float
    val_loss: float | None
    lr: float


@dataclass
class TrainReport:
    """Per-epoch loss curve plus stage boundaries, serializable to JSON/CSV."""

    config: dict
    epochs: list = field(default_factory=list)
    stage_names: list = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.epochs[0].train_loss

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].train_loss

    def stage_boundaries(self) -> list:
        """Indices into the epoch list where a new stage begins."""
        return [i for i in range(1, len(self.epochs))
                if self.epochs[i].stage != self.epochs[i - 1].stage]

    def boundary_spikes(self) -> tuple:
        """(spikes, boundaries): at how many stage transitions the first
        epoch of the new stage lost more than the last epoch of the old."""
        boundaries = self.stage_boundaries()
        spikes = sum(1 for i in boundaries
                     if self.epochs[i].train_loss > self.epochs[i - 1].train_loss)
        return spikes, len(boundaries)

    def to_dict(self) -> dict:
        spikes, boundaries = self.boundary_spikes() if len(self.epochs) else (0, 0)
        return {
            "config": self.config,
            "stage_names": list(self.stage_names),
            "epochs": [asdict(e) for e in self.epochs],
            "initial_loss": self.initial_loss if self.epochs else None,
            "final_loss": self.final_loss if self.epochs else None,
            "boundary_spikes": spikes,
            "stage_boundaries": boundaries,
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "stage_name", "epoch", "train_loss",
                             "val_loss", "lr"])
            for e in self.epochs:
                writer.writerow([e.stage, e.stage_name, e.epoch,
                                 f"{e.train_loss:.8f}",
                                 "" if e.val_loss is None else f"{e.val_loss:.8f}",
                                 f"{e.lr:.8g}"])


class Trainer:
    """Runs a stage list on one network with Adam and plateau decay.

    One optimizer and scheduler live across all stages, so both the weights
    and the learning-rate state carry over at stage boundaries. When a stage
    has no validation videos the scheduler steps on the training loss.
    """

    def __init__(self, net, config: TrainConfig = TrainConfig()):
        self.net = net
        self.config = config
        self.criterion = DepthLoss(config.weights)
        self.optimizer = torch.optim.Adam(net.parameters(), lr=config.lr)
        self.scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
            self.optimizer, factor=config.plateau_factor,
            patience=config.plateau_patience)

    def _loader(self, dataset, shuffle: bool) -> DataLoader:
        gen = torch.Generator()
        gen.manual_seed(self.config.seed)
        return DataLoader(dataset, batch_size=self.config.batch_size,
                          shuffle=shuffle, generator=gen if shuffle else None)

    def _train_epoch(self, loader: DataLoader) -> float:
        self.net.train()
        total, count = 0.0, 0
        for rgb, target in loader:
            self.optimizer.zero_grad()
            loss = self.criterion(self.net(rgb), target)
            loss.backward()
            self.optimizer.step()
            total += float(loss.detach()) * rgb.shape[0]
            count += rgb.shape[0]
        return total / count

    @torch.no_grad()
    def _eval_loss(self, loader: DataLoader) -> float:
        self.net.eval()
        total, count = 0.0, 0
        for rgb, target in loader:
            total += float(self.criterion(self.net(rgb), target)) * rgb.shape[0]
            count += rgb.shape[0]
        return total / count

    def fit(self, stages, json_path=None, csv_path=None) -> TrainReport:
        torch.manual_seed(self.config.seed)
        report = TrainReport(config=asdict(self.config),
                             stage_names=[s.name for s in stages])
        for stage_idx, stage in enumerate(stages):
            train_loader = self._loader(FrameDataset(stage.train_dirs), True)
            val_loader = (self._loader(FrameDataset(stage.val_dirs), False)
                          if stage.val_dirs else None)
            for epoch in range(stage.epochs):
                train_loss = self._train_epoch(train_loader)
                val_loss = (self._eval_loss(val_loader)
                            if val_loader is not None else None)
                # no val split: fall back to the training loss for decay
                self.scheduler.step(train_loss if val_loss is None else val_loss)
                report.epochs.append(EpochRecord(
                    stage=stage_idx, stage_name=stage.name, epoch=epoch,
                    train_loss=train_loss, val_loss=val_loss,
                    lr=self.optimizer.param_groups[0]["lr"]))
        if json_path is not None:
            report.save_json(json_path)
        if csv_path is not None:
            report.save_csv(csv_path)
        return report


@torch.no_grad()
def evaluate_threshold(net, dataset: FrameDataset,
                       batch_size: int = 4) -> float:
    """Percentage of pixels with max(d/t, t/d) below 1.25, in metric depth.

    Predictions and targets are both decoded from gamma space to centimetres
    with the dataset's own encoding before the ratio test.
    """
    net.eval()
    encoding = dataset.encoding
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    good, total = 0, 0
    for rgb, target in loader:
        pred_cm = decode_depth(net(rgb), encoding).clamp(min=1e-6)
        truth_cm = decode_depth(target, encoding).clamp(min=1e-6)
        ratio = torch.maximum(pred_cm / truth_cm, truth_cm / pred_cm)
        good += int((ratio < THRESHOLD_RATIO).sum())
        total += ratio.numel()
    return 100.0 * good / total
