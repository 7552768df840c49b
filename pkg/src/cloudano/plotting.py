"""Bar charts of evaluation summaries, written as PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import SPLITS, EvalSummary  # noqa: E402


def _bars(summaries: Sequence[EvalSummary], metric: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(1, len(summaries))
    x = np.arange(len(SPLITS))
    for i, s in enumerate(summaries):
        values = [s.aca(k) if metric == "aca" else (s.atca(k) or 0.0) for k in SPLITS]
        ax.bar(x + i * width - 0.4 + width / 2, values, width, label=s.detector_id)
    ax.set_xticks(x, SPLITS)
    ax.set_ylim(0, 105)
    ax.set_ylabel(f"{metric.upper()} (%)")
    ax.legend(fontsize="small", loc="lower right")
    fig.tight_layout()
    # fixed metadata keeps the files byte-stable across runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_summaries(summaries: Sequence[EvalSummary], out_dir: str | Path) -> list[Path]:
    """Write ``aca.png`` and, when any detector is typed, ``atca.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [_bars(summaries, "aca", out / "aca.png")]
    typed = [s for s in summaries if s.typed]
    if typed:
        paths.append(_bars(typed, "atca", out / "atca.png"))
    return paths
