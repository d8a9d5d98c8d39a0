"""File I/O utilities for spacerank."""

import csv
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

from .constants import (
    MODEL_DUMP_VERSION,
    OBJECTIVE_COLUMN,
    SCORE_CSV_VERSION,
    SPACE_FORMAT_VERSION,
    TOOL_NAME,
    TOOL_VERSION,
)
from .core import Dataset, Observation, SearchSpace, SpaceRankError

logger = logging.getLogger(__name__)

MANIFEST_PREFIX = "# manifest: "
MANIFEST_FILE = "manifest.json"


class InputFormatError(SpaceRankError, ValueError):
    """Exception raised for malformed input files."""

    def __init__(
        self,
        message: str,
        path: str = "",
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        location = path
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        super().__init__(f"{location}: {message}" if location else message)
        self.path = path
        self.line = line
        self.column = column


def read_file_content(file_path: str) -> str:
    """Read a space, observation or manifest file as UTF-8 text.

    Raises:
        FileNotFoundError: If file does not exist.
        IOError: If file cannot be read.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            content = f.read()
    except FileNotFoundError:
        logger.error(f"Input file not found: {file_path}")
        raise
    except IOError as e:
        logger.error(f"Cannot read input file {file_path}: {e}")
        raise
    logger.debug(f"Read {len(content)} characters of input from {file_path}")
    return content


def save_text_file(file_path: str, content: str) -> None:
    """Write an artifact with Unix newlines.

    Raises:
        IOError: If file cannot be written.
    """
    try:
        with open(file_path, "w", encoding="utf-8", newline="") as f:
            f.write(content)
    except IOError as e:
        logger.error(f"Cannot write artifact {file_path}: {e}")
        raise
    logger.info(f"Wrote artifact {file_path}")


def ensure_directory_exists(directory: str) -> None:
    """Create an output directory for run artifacts.

    Raises:
        OSError: If directory cannot be created.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        logger.error(f"Cannot create output directory {directory}: {e}")
        raise
    logger.debug(f"Output directory ready: {directory}")


def validate_file_exists(file_path: str) -> None:
    """Raise FileNotFoundError naming the missing input file."""
    if not os.path.isfile(file_path):
        raise FileNotFoundError(f"Input file not found: {file_path}")


def file_digest(file_path: str) -> str:
    """SHA-256 hex digest of a file's bytes."""
    sha = hashlib.sha256()
    with open(file_path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            sha.update(block)
    return sha.hexdigest()


def parse_json(content: str, path: str = "") -> Any:
    """Parse JSON, reporting the failing line and column.

    Raises:
        InputFormatError: If content is not valid JSON.
    """
    try:
        return json.loads(content)
    except json.JSONDecodeError as e:
        raise InputFormatError(e.msg, path=path, line=e.lineno, column=e.colno)


def load_space(file_path: str) -> SearchSpace:
    """Load a search space JSON document; its name defaults to the file stem.

    Raises:
        FileNotFoundError: If the file does not exist.
        InputFormatError: If the JSON is malformed.
        SpaceDefinitionError: If the document does not define a valid space.
    """
    validate_file_exists(file_path)
    doc = parse_json(read_file_content(file_path), path=file_path)
    stem = os.path.splitext(os.path.basename(file_path))[0]
    space = SearchSpace.from_dict(doc, name=stem)
    if not space.name:
        space = space.with_name(stem)
    logger.info(f"Loaded space '{space.name}' with {space.d} dimensions")
    return space


def format_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_json(file_path: str, doc: Any) -> None:
    save_text_file(file_path, format_json(doc))


def save_space(file_path: str, space: SearchSpace) -> None:
    doc = {"version": SPACE_FORMAT_VERSION, **space.to_dict()}
    save_json(file_path, doc)


def _parse_cell(cell: str, path: str, line: int, column: int, name: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise InputFormatError(
            f"Column '{name}' has non-numeric value {cell!r}",
            path=path,
            line=line,
            column=column,
        )
    if not math.isfinite(value):
        raise InputFormatError(
            f"Column '{name}' has non-finite value {cell!r}",
            path=path,
            line=line,
            column=column,
        )
    return value


def parse_observations(
    content: str, space: SearchSpace, path: str = "", negate: bool = False
) -> Dataset:
    """Parse observation CSV text: one column per dimension plus ``objective``.

    Lines starting with ``#`` are ignored. Columns may come in any order.

    Raises:
        InputFormatError: On a missing or unknown column, a malformed cell,
            or a point outside the space.
    """
    rows = [
        (number, row)
        for number, row in enumerate(csv.reader(io.StringIO(content)), start=1)
        if row and not row[0].lstrip().startswith("#")
    ]
    if not rows:
        raise InputFormatError("File has no header row", path=path, line=1)

    header_line, header = rows[0]
    header = [h.strip() for h in header]
    expected = space.names + [OBJECTIVE_COLUMN]
    for name in expected:
        if name not in header:
            raise InputFormatError(
                f"Missing column '{name}'", path=path, line=header_line
            )
    for position, name in enumerate(header, start=1):
        if name not in expected or header.count(name) > 1:
            raise InputFormatError(
                f"Unexpected or duplicate column '{name}'",
                path=path,
                line=header_line,
                column=position,
            )

    columns = [header.index(name) for name in space.names]
    objective_column = header.index(OBJECTIVE_COLUMN)
    observations = []
    for number, row in rows[1:]:
        if len(row) != len(header):
            raise InputFormatError(
                f"Expected {len(header)} fields, got {len(row)}", path=path, line=number
            )
        x = []
        for dim, column in zip(space.dims, columns):
            value = _parse_cell(row[column], path, number, column + 1, dim.name)
            if not dim.contains(value):
                raise InputFormatError(
                    f"Value {value} of '{dim.name}' is outside "
                    f"[{dim.lower}, {dim.upper}]",
                    path=path,
                    line=number,
                    column=column + 1,
                )
            x.append(value)
        y = _parse_cell(
            row[objective_column], path, number, objective_column + 1, OBJECTIVE_COLUMN
        )
        observations.append(Observation(tuple(x), -y if negate else y))

    logger.debug(f"Parsed {len(observations)} observations from {path or 'text'}")
    return Dataset(space, tuple(observations))


def load_observations(
    file_path: str, space: SearchSpace, negate: bool = False
) -> Dataset:
    """Load an observation CSV file.

    Raises:
        FileNotFoundError: If the file does not exist.
        InputFormatError: If the file is malformed.
    """
    validate_file_exists(file_path)
    data = parse_observations(read_file_content(file_path), space, file_path, negate)
    logger.info(f"Loaded {data.n} observations from {file_path}")
    return data


def save_observations(
    file_path: str, data: Dataset, manifest: Optional["RunManifest"] = None
) -> None:
    rows = [
        {**dict(zip(data.space.names, o.x)), OBJECTIVE_COLUMN: o.y} for o in data.obs
    ]
    columns = data.space.names + [OBJECTIVE_COLUMN]
    save_text_file(file_path, format_csv(columns, rows, manifest))


@dataclass
class RunManifest:
    """Everything needed to re-run a command bit-exactly. No timestamps."""

    command: str
    seed: int
    arguments: Dict[str, Any] = field(default_factory=dict)
    input_digests: Dict[str, str] = field(default_factory=dict)
    tool: str = TOOL_NAME
    tool_version: str = TOOL_VERSION
    format_versions: Dict[str, int] = field(
        default_factory=lambda: {
            "space": SPACE_FORMAT_VERSION,
            "score_csv": SCORE_CSV_VERSION,
            "model_dump": MODEL_DUMP_VERSION,
        }
    )

    def add_input(self, file_path: str) -> None:
        self.input_digests[os.path.basename(file_path)] = file_digest(file_path)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_comment(self) -> str:
        return MANIFEST_PREFIX + json.dumps(
            self.to_dict(), sort_keys=True, separators=(",", ":")
        )


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    manifest: Optional[RunManifest] = None,
) -> str:
    """CSV text with a header row and an optional trailing manifest comment."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_value(row.get(c, "")) for c in columns])
    if manifest is not None:
        buffer.write(manifest.to_comment() + "\n")
    return buffer.getvalue()


def save_csv(
    file_path: str,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    manifest: Optional[RunManifest] = None,
) -> None:
    save_text_file(file_path, format_csv(columns, rows, manifest))


def read_manifest(file_path: str) -> Dict[str, Any]:
    """Extract the manifest from a CSV's trailing comment or a manifest.json.

    Raises:
        InputFormatError: If no manifest is found.
    """
    content = read_file_content(file_path)
    if file_path.endswith(".json"):
        return parse_json(content, path=file_path)
    for number, line in enumerate(content.splitlines(), start=1):
        if line.startswith(MANIFEST_PREFIX):
            return parse_json(line[len(MANIFEST_PREFIX):], path=f"{file_path}:{number}")
    raise InputFormatError("No manifest comment found", path=file_path)


def save_run_manifest(output_dir: str, manifest: RunManifest) -> str:
    """Write manifest.json into output_dir and return its path."""
    ensure_directory_exists(output_dir)
    path = os.path.join(output_dir, MANIFEST_FILE)
    save_json(path, manifest.to_dict())
    return path

