"""
Interaction log ingestion.

Reads CSV/TSV files with header `user_id,item_id,domain_id,timestamp`.
Malformed rows are skipped and tallied; more than 1% malformed rows
rejects the whole file.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import pandas as pd

import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import FormatError, IoError
from .records import InteractionRecord

logger = logging.getLogger(__name__)

COLUMNS = ["user_id", "item_id", "domain_id", "timestamp"]
MAX_MALFORMED_FRACTION = 0.01


@dataclass
class IngestResult:
    """Parsed records plus the malformed-row tally."""
    records: List[InteractionRecord] = field(default_factory=list)
    total_rows: int = 0
    malformed_rows: int = 0


def _separator(path: str, fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = "tsv" if path.lower().endswith((".tsv", ".tab")) else "csv"
    if fmt not in ("csv", "tsv"):
        raise FormatError(f"Unsupported interaction format: {fmt}")
    return "\t" if fmt == "tsv" else ","


def _integer_column(values: pd.Series) -> pd.Series:
    """Parse to int, NaN where the text is not an integer."""
    numeric = pd.to_numeric(values.str.strip(), errors="coerce")
    return numeric.where(numeric == numeric.round())


def read_interactions(path: str, fmt: Optional[str] = None) -> IngestResult:
    """
    Parse an interaction file.

    Args:
        path: CSV or TSV file
        fmt: "csv" or "tsv"; inferred from the extension when omitted

    Returns:
        IngestResult with the valid records in file order

    Raises:
        IoError: file missing or unreadable
        FormatError: missing columns or more than 1% malformed rows
    """
    sep = _separator(path, fmt)
    if not os.path.isfile(path):
        raise IoError(f"Interaction file not found: {path}")

    try:
        frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        logger.warning("Interaction file %s is empty", path)
        return IngestResult()
    except (OSError, UnicodeDecodeError) as e:
        raise IoError(f"Cannot read {path}: {e}") from e

    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")

    total = len(frame)
    if total == 0:
        logger.warning("Interaction file %s has no rows", path)
        return IngestResult()

    users = frame["user_id"].str.strip()
    items = frame["item_id"].str.strip()
    domains = _integer_column(frame["domain_id"])
    stamps = _integer_column(frame["timestamp"])

    valid = (users != "") & (items != "") & domains.notna() & stamps.notna() & (domains >= 0)
    malformed = int((~valid).sum())
    if malformed:
        logger.warning("%s: skipped %d malformed rows out of %d", path, malformed, total)
    if malformed / total > MAX_MALFORMED_FRACTION:
        raise FormatError(
            f"{path}: {malformed}/{total} malformed rows exceeds {MAX_MALFORMED_FRACTION:.0%}"
        )

    records = [
        InteractionRecord(user_id=u, item_id=i, domain_id=int(d), timestamp=int(t))
        for u, i, d, t in zip(users[valid], items[valid], domains[valid], stamps[valid])
    ]
    return IngestResult(records=records, total_rows=total, malformed_rows=malformed)


def ingest(path: str, fmt: Optional[str] = None) -> List[InteractionRecord]:
    """Parse an interaction file and return its valid records."""
    result = read_interactions(path, fmt)
    logger.info("Ingested %d records from %s", len(result.records), path)
    return result.records


def write_interactions(records: List[InteractionRecord], path: str, fmt: Optional[str] = None) -> None:
    """Write records with the standard header (deterministic byte output)."""
    sep = _separator(path, fmt)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame(
        [(r.user_id, r.item_id, r.domain_id, r.timestamp) for r in records],
        columns=COLUMNS,
    )
    frame.to_csv(path, sep=sep, index=False, lineterminator="\n")
