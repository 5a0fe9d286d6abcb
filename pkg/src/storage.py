from __future__ import annotations

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .utils import dumps, ensure_dir, file_digest, iso_ts, write_json

logger = logging.getLogger(__name__)

OUT_DIR = Path("out")
LOG_DIR = OUT_DIR / "logs"

BENCH_COLUMNS = [
    "n",
    "t",
    "builder",
    "build_seconds",
    "space",
    "layers",
    "pairs",
    "max_stretch",
    "avg_stretch",
    "l2_stretch",
    "probes_per_query",
]


def append_log(date: datetime, event: str, payload: Dict, log_dir: Optional[Path] = None, tz_name: str = "Asia/Seoul") -> Path:
    """runner_YYYYMMDD.json 에 이벤트 한 줄(JSON lines)을 덧붙입니다."""

    directory = Path(log_dir) if log_dir is not None else LOG_DIR
    ensure_dir(directory)
    path = directory / f"runner_{date.strftime('%Y%m%d')}.json"
    record = {"event": event, "ts": iso_ts(date, tz_name), **payload}
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False, default=str) + "\n")
    return path


def write_artifact(path: Path, payload: Any) -> Path:
    write_json(path, payload)
    logger.debug("storage::write_artifact :: %s", path)
    return path


def manifest_path(artifact: Path) -> Path:
    # 디렉터리 산출물(oracle)은 내부에 manifest.json 이 따로 있으므로 옆에 둔다.
    return artifact.parent / f"{artifact.name.rstrip('/')}.manifest.json"


def _digests(outputs: Iterable[Path]) -> Dict[str, str]:
    digests: Dict[str, str] = {}
    for output in outputs:
        output = Path(output)
        if output.is_dir():
            for child in sorted(output.iterdir()):
                if child.is_file():
                    digests[f"{output.name}/{child.name}"] = file_digest(child)
        elif output.exists():
            digests[output.name] = file_digest(output)
    return digests


def write_manifest(
    artifact: Path,
    command: str,
    source: Dict[str, Any],
    params: Dict[str, Any],
    seed: Optional[int],
    outputs: Iterable[Path],
    timings: Dict[str, float],
) -> Path:
    """RunManifest: 같은 입력/플래그로 다시 돌리면 같은 digest 가 나와야 합니다.

    초심자 팁: 시각(ts)은 재현성 비교에서 빼고 timings 만 기록합니다.
    """

    record = {
        "command": command,
        "input": source,
        "params": params,
        "seed": seed,
        "version": __version__,
        "outputs": _digests(outputs),
        "timings": {key: round(float(value), 6) for key, value in timings.items()},
    }
    path = manifest_path(Path(artifact))
    write_json(path, record)
    return path


def write_bench(rows: List[Dict[str, Any]], path: Path) -> List[Path]:
    """벤치 표를 CSV 로, 가능하면 parquet 으로도 남깁니다."""

    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS) if rows else pd.DataFrame(columns=BENCH_COLUMNS)
    ensure_dir(path.parent)
    csv_path = path.with_suffix(".csv")
    frame.to_csv(csv_path, index=False, float_format="%.6g")
    written = [csv_path]
    try:
        parquet_path = path.with_suffix(".parquet")
        frame.to_parquet(parquet_path, index=False)
        written.append(parquet_path)
    except ImportError:
        logger.info("storage::write_bench :: parquet engine missing, csv only")
    return written


def write_coordinates(coords: np.ndarray, path: Path) -> Path:
    ensure_dir(path.parent)
    frame = pd.DataFrame(coords, columns=[f"c{i}" for i in range(coords.shape[1])])
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_coordinates(path: Path) -> np.ndarray:
    frame = pd.read_csv(path)
    return frame.to_numpy(dtype=np.float64)


def print_json(payload: Any) -> str:
    text = dumps(payload)
    print(text)
    return text
