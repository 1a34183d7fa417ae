import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from app.config import settings
from app.core.rng import RNG_ALGORITHM

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SCAN_COLUMNS = (
    "schema_version", "d", "q", "J", "epsilon", "L", "r", "mode",
    "theta", "theta_se", "tv", "tv_se", "n_samples", "seed",
)


def canonical_json(data: Mapping[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


class ResultRepository:
    """
    Self-describing run artifacts under one output directory.

    CSV tables open with ``#`` lines carrying the schema version, the RNG
    algorithm and the canonical resolved configuration; only the JSON
    summary carries a timestamp, so CSV files of identical runs are
    byte-identical.
    """

    def __init__(self, directory: Optional[str] = None):
        self.directory = Path(directory or settings.output_dir)

    def _prepare(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)

    def header_lines(self, config: Mapping[str, Any]) -> List[str]:
        return [
            f"# schema_version={SCHEMA_VERSION}",
            f"# rng={RNG_ALGORITHM}",
            f"# config={canonical_json(config)}",
        ]

    def write_table(self, name: str, columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
                    config: Mapping[str, Any]) -> Path:
        """Write rows under a fixed column order"""
        self._prepare()
        path = self.directory / f"{name}.csv"
        try:
            with path.open("w", encoding="utf-8", newline="") as f:
                for line in self.header_lines(config):
                    f.write(line + "\n")
                writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({key: "" if row.get(key) is None else row.get(key) for key in columns})
        except OSError as e:
            logger.error(f"Failed to write table {path}: {e}")
            raise
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def write_summary(self, name: str, summary: Mapping[str, Any], config: Mapping[str, Any],
                      wall_time: float) -> Path:
        """JSON summary with the configuration echo, wall time and timestamp"""
        self._prepare()
        path = self.directory / f"{name}.json"
        document: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "rng": RNG_ALGORITHM,
            "config": dict(config),
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_time_seconds": wall_time,
        }
        document.update(summary)
        try:
            path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to write summary {path}: {e}")
            raise
        logger.info(f"Wrote summary to {path}")
        return path

    @staticmethod
    def read_table(path: Path) -> List[Dict[str, str]]:
        """Rows of a table written by ``write_table`` (header comments skipped)"""
        with Path(path).open(encoding="utf-8", newline="") as f:
            body = [line for line in f if not line.startswith("#")]
        return list(csv.DictReader(body))

    @staticmethod
    def read_header(path: Path) -> Dict[str, str]:
        header: Dict[str, str] = {}
        with Path(path).open(encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
        return header
