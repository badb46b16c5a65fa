"""Training schedules: curriculum over difficulty levels, or direct transfer.

A schedule is just an ordered list of stages; the trainer runs them back to
back on one network, so weights carry over from stage to stage. The
curriculum schedule orders stages by ascending level; the transfer schedule
is a single stage on the hardest data.
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Stage:
    """One training stage: a name, its video directories, and a duration."""

    name: str
    train_dirs: tuple
    val_dirs: tuple = field(default_factory=tuple)
    epochs: int = 10

    def __post_init__(self):
        object.__setattr__(self, "train_dirs", tuple(self.train_dirs))
        object.__setattr__(self, "val_dirs", tuple(self.val_dirs))
        if not self.train_dirs:
            raise ValueError(f"stage {self.name!r} has no training videos")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


def curriculum_stages(videos_by_level, epochs_per_stage: int = 10,
                      val_by_level=None) -> list:
    """One stage per difficulty level, easiest first, weights carried over."""
    if not videos_by_level:
        raise ValueError("need at least one level")
    val_by_level = val_by_level or {}
    stages = []
    for level in sorted(videos_by_level):
        stages.append(Stage(name=f"level{level}",
                            train_dirs=tuple(videos_by_level[level]),
                            val_dirs=tuple(val_by_level.get(level, ())),
                            epochs=epochs_per_stage))
    return stages


def transfer_stage(train_dirs, val_dirs=(), epochs: int = 10) -> list:
    """Single-stage schedule: train directly on the target data."""
    return [Stage(name="transfer", train_dirs=tuple(train_dirs),
                  val_dirs=tuple(val_dirs), epochs=epochs)]
