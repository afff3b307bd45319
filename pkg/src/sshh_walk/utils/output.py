"""
Result files: tables with a metadata header, state dumps and operator dumps.

Every artifact starts with a header that echoes the resolved recipe, so the
file alone is enough to re-run the experiment that produced it. Files are
written to a temporary name in the target directory and renamed into place.
"""

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from .. import __version__

logger = logging.getLogger(__name__)

ARTIFACT = "sshh-walk"
STATE_FORMAT_VERSION = 1
RECIPE_PREFIX = "# recipe: "

PathLike = Union[str, Path]


@dataclass
class Table:
    """Named table; ``columns`` fixes the column order of ``rows``."""

    name: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def column(self, name: str) -> List[Any]:
        return [row[name] for row in self.rows]


def build_header(recipe: Dict[str, Any]) -> Dict[str, Any]:
    """Header block for ``recipe``; the output location is left out so replays match."""
    experiment = {key: value for key, value in recipe.items() if key != "output"}
    return {
        "artifact": ARTIFACT,
        "version": __version__,
        "defaults_version": recipe.get("version"),
        "command": recipe.get("command"),
        "recipe": experiment,
    }


def _encode(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return int(value)
    return value


def render_csv(table: Table, header: Dict[str, Any]) -> str:
    buffer = io.StringIO()
    buffer.write(f"# {header['artifact']} {header['version']}\n")
    buffer.write(f"# defaults_version: {header['defaults_version']}\n")
    buffer.write(f"# command: {header['command']}\n")
    buffer.write(f"# table: {table.name}\n")
    buffer.write(RECIPE_PREFIX + json.dumps(header["recipe"], sort_keys=True) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_encode(row[c]) for c in table.columns])
    return buffer.getvalue()


def render_json(table: Table, header: Dict[str, Any]) -> str:
    document = {
        "header": dict(header, table=table.name),
        "columns": table.columns,
        "rows": [[_encode(row[c]) for c in table.columns] for row in table.rows],
    }
    return json.dumps(document, indent=1, sort_keys=True) + "\n"


def write_atomic(path: PathLike, data: Union[str, bytes]) -> Path:
    """Write ``data`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_tables(
    tables: Sequence[Table], out_dir: PathLike, fmt: str, header: Dict[str, Any]
) -> List[Path]:
    """Render every table first, then write them; rendering errors leave no files."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"Unknown output format: {fmt}")
    render = render_csv if fmt == "csv" else render_json
    rendered = [(f"{t.name}.{fmt}", render(t, header)) for t in tables]
    paths = [write_atomic(Path(out_dir) / name, text) for name, text in rendered]
    for path in paths:
        logger.info(f"Saved {path}")
    return paths


def read_header(path: PathLike) -> Dict[str, Any]:
    """Header of a table written by :func:`write_tables` (either format)."""
    path = Path(path)
    text = path.read_text()
    if not text.lstrip().startswith("#"):
        return json.loads(text)["header"]

    header: Dict[str, Any] = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        if line.startswith(RECIPE_PREFIX):
            header["recipe"] = json.loads(line[len(RECIPE_PREFIX) :])
        elif ": " in line:
            key, value = line[2:].split(": ", 1)
            header[key] = value
        else:
            artifact, _, version = line[2:].partition(" ")
            header["artifact"], header["version"] = artifact, version
    if "recipe" not in header:
        raise ValueError(f"{path} has no recipe header")
    return header


def read_table(path: PathLike) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """Header and rows of a table; CSV values come back as strings."""
    path = Path(path)
    header = read_header(path)
    text = path.read_text()
    if text.lstrip().startswith("#"):
        body = [line for line in text.splitlines() if not line.startswith("#")]
        return header, list(csv.DictReader(body))
    document = json.loads(text)
    return header, [dict(zip(document["columns"], row)) for row in document["rows"]]


def operator_table(name: str, matrix: Any) -> Table:
    """Coordinate list (row, col, re, im) of a sparse matrix."""
    coo = matrix.tocoo()
    rows = [
        {"row": int(i), "col": int(j), "re": float(v.real), "im": float(v.imag)}
        for i, j, v in zip(coo.row, coo.col, coo.data)
    ]
    return Table(name, ["row", "col", "re", "im"], rows)


def save_states(
    path: PathLike,
    amplitudes: np.ndarray,
    header: Dict[str, Any],
    **arrays: np.ndarray,
) -> Path:
    """Dump state vectors (one per row) to ``.npz`` with a versioned JSON header."""
    buffer = io.BytesIO()
    np.savez(
        buffer,
        format_version=np.array(STATE_FORMAT_VERSION),
        header=np.array(json.dumps(header, sort_keys=True)),
        amplitudes=np.asarray(amplitudes),
        **arrays,
    )
    return write_atomic(path, buffer.getvalue())


def load_states(path: PathLike) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != STATE_FORMAT_VERSION:
            raise ValueError(f"Unsupported state file version {version}")
        header = json.loads(str(data["header"]))
        arrays = {key: data[key] for key in data.files if key not in ("format_version", "header")}
    return header, arrays
