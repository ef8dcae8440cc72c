"""
Artifact store for run and data directories.

Every file written through an `ArtifactStore` is recorded with its SHA-256
digest; closing the store writes `manifest.json` listing them. CSV floats are
written with 17 significant digits so tables read back bit-identical.
"""

import json
from pathlib import Path
from typing import Any

import pandas as pd

import pypinnkf.core.constants as const
import pypinnkf.core.utilities as utils
from pypinnkf.core.structures import ArtifactError
from pypinnkf.tools.logger import get_logger

logger = get_logger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


class ArtifactStore:
    """Owns one output directory and its manifest."""

    def __init__(self, root: str | Path, manifest_name: str = const.MANIFEST_FILE):
        self.root = Path(root)
        self.manifest_name = manifest_name
        self.files: dict[str, str] = {}
        ''' relative path -> sha256 '''
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(self.root, f"Cannot create output directory ({e})") from e
        self._load_manifest()

    def _load_manifest(self) -> None:
        """Keep entries of an earlier manifest in the same directory whose files still exist."""
        p = self.path(self.manifest_name)
        if not p.exists():
            return
        try:
            entries = read_json(p).get("files", [])
        except (ArtifactError, AttributeError) as e:
            logger.warning(f"Ignoring unreadable manifest: {e}")
            return
        for entry in entries:
            if isinstance(entry, dict) and self.path(entry.get("path", "")).is_file():
                self.files[entry["path"]] = entry.get("sha256", "")

    def __enter__(self) -> "ArtifactStore":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.write_manifest()
        return False

    def path(self, name: str) -> Path:
        return self.root / name

    def _record(self, path: Path) -> Path:
        try:
            self.files[path.relative_to(self.root).as_posix()] = utils.sha256_file(path)
        except OSError as e:
            raise ArtifactError(path, f"Cannot checksum artifact ({e})") from e
        logger.debug(f"Wrote {path}")
        return path

    def write_csv(self, name: str, df: pd.DataFrame) -> Path:
        p = self.path(name)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            df.to_csv(p, index=False, float_format=CSV_FLOAT_FORMAT)
        except OSError as e:
            raise ArtifactError(p, f"Could not write CSV ({e})") from e
        return self._record(p)

    def write_rows(self, name: str, rows: list[dict[str, Any]], columns: list[str] | None = None) -> Path:
        return self.write_csv(name, pd.DataFrame(rows, columns=columns))

    def write_json(self, name: str, payload: Any) -> Path:
        p = self.path(name)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(json.dumps(utils.to_native(payload), indent=2, sort_keys=False) + "\n", encoding="utf-8")
        except OSError as e:
            raise ArtifactError(p, f"Could not write JSON ({e})") from e
        return self._record(p)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
        except OSError as e:
            raise ArtifactError(p, f"Could not write file ({e})") from e
        return self._record(p)

    def write_manifest(self) -> Path:
        p = self.path(self.manifest_name)
        payload = {"files": [{"path": k, "sha256": v} for k, v in sorted(self.files.items())]}
        try:
            p.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise ArtifactError(p, f"Could not write manifest ({e})") from e
        return p


def read_csv(path: str | Path) -> pd.DataFrame:
    p = Path(path)
    try:
        return pd.read_csv(p)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(p, f"Could not read CSV ({e})") from e


def read_json(path: str | Path) -> Any:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(p, f"Could not read JSON ({e})") from e
