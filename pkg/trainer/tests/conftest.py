"""Shared fixtures: rendered videos produced through the dataset CLI.

The harness only ever sees video directories, so fixtures shell out to the
`synthcolon` command exactly as a user would.
"""

import shutil
import subprocess

import pytest


def _require_cli():
    if shutil.which("synthcolon") is None:
        pytest.skip("synthcolon command not installed")


def generate_video(out_dir, level, frames, seed, width, height,
                   axial=300, radial=64) -> str:
    _require_cli()
    argv = ["synthcolon", "generate", "--level", str(level),
            "--frames", str(frames), "--seed", str(seed),
            "--width", str(width), "--height", str(height),
            "--axial-steps", str(axial), "--radial-steps", str(radial),
            "--out", str(out_dir)]
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"generate failed: {proc.stderr.strip()[-500:]}")
    return str(out_dir)


@pytest.fixture(scope="session")
def tiny_video(tmp_path_factory):
    """Three 64x48 frames for format-level tests."""
    out = tmp_path_factory.mktemp("tiny") / "video"
    return generate_video(out, level=1, frames=3, seed=41, width=64,
                          height=48, axial=150, radial=48)


@pytest.fixture(scope="session")
def smoke_videos(tmp_path_factory):
    """200 desk-scale training frames plus a held-out clip, both level 1."""
    root = tmp_path_factory.mktemp("smoke")
    train = generate_video(root / "train", level=1, frames=200, seed=21,
                           width=320, height=270)
    heldout = generate_video(root / "heldout", level=1, frames=20, seed=22,
                             width=320, height=270)
    return train, heldout


@pytest.fixture(scope="session")
def curriculum_videos(tmp_path_factory):
    """One small video per level, for the curriculum run."""
    root = tmp_path_factory.mktemp("curriculum")
    return {level: generate_video(root / f"level{level}", level=level,
                                  frames=24, seed=30 + level, width=160,
                                  height=136)
            for level in range(1, 6)}
