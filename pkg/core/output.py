"""
Writing JSON and CSV result documents.

Every document carries ``schema: 1``. Run-dependent values (timestamp,
thread count) live in a separate metadata block so the numeric payload of two
identical runs is byte-identical.
"""

import csv
import io
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from core.errors import DomainError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STDOUT = "-"


def build_metadata(threads: Optional[int] = None) -> Dict:
    return {"timestamp": datetime.now().isoformat(), "threads": threads}


def json_document(command: str, data: Dict, threads: Optional[int] = None) -> str:
    """Serialize a result as a versioned JSON document."""
    document = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "data": data,
        "metadata": build_metadata(threads),
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def csv_document(
    header: Sequence[str],
    rows: Sequence[Sequence],
    comments: Optional[Dict[str, str]] = None,
    threads: Optional[int] = None,
) -> str:
    """
    Serialize a table as CSV, preceded by ``# key: value`` comment lines.

    The first comment is always the schema version; the metadata comments
    come last.
    """
    buffer = io.StringIO()
    buffer.write(f"# schema: {SCHEMA_VERSION}\n")
    for key, value in (comments or {}).items():
        buffer.write(f"# {key}: {value}\n")
    for key, value in build_metadata(threads).items():
        buffer.write(f"# {key}: {value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_output(text: str, output: str = STDOUT):
    """Write a finished document to a file, or to stdout for ``-``."""
    if output == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    path = Path(output)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {len(text)} bytes to {path}")
    except OSError as e:
        raise DomainError(f"cannot write output {path}: {e}") from e


def strip_metadata(text: str) -> str:
    """Drop the run-dependent parts of a document, leaving numeric content only."""
    if text.lstrip().startswith("{"):
        document = json.loads(text)
        document.pop("metadata", None)
        return json.dumps(document, indent=2, sort_keys=True)
    lines: List[str] = [
        line
        for line in text.splitlines()
        if not line.startswith(("# timestamp:", "# threads:"))
    ]
    return "\n".join(lines)
