"""Run manifests: a JSON sidecar recording exactly how an output file was
produced, so any result can be regenerated byte-identically."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path


def tool_version() -> str:
    from . import __version__

    return __version__


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int | None
    tool_version: str
    timestamp: str

    @classmethod
    def create(cls, command: str, parameters: dict, seed: int | None = None):
        return cls(
            command=command,
            parameters=parameters,
            seed=seed,
            tool_version=tool_version(),
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, out_path: Path) -> Path:
        path = Path(str(out_path) + ".manifest.json")
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def format_float(x: float) -> str:
    """Locale-free decimal with 17 significant digits (round-trip exact)."""
    return f"{x:.17g}"


def write_csv(path: Path, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [
            cell if isinstance(cell, str) else format_float(float(cell))
            for cell in row
        ]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
