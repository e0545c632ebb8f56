"""Factor CSV files: header ``id,f0,...,f{k-1}``, one factor per row, UTF-8.

Values are written with full round-trip precision so that writing a loaded canonical
file reproduces it byte for byte.
"""

import csv
from typing import Iterable, Iterator, List, TextIO

from pytessindex.exceptions import TessDomainError, TessParseError
from pytessindex.geometry import DenseFactor
from pytessindex.logger import get_logger


def factor_header(k: int) -> List[str]:
    return ["id"] + [f"f{column}" for column in range(k)]


def write_factor_rows(outfile: TextIO, factors: Iterable[DenseFactor], k: int) -> None:
    """Writes the header and one row per factor, in the given order."""
    writer = csv.writer(outfile, lineterminator="\n")
    writer.writerow(factor_header(k))
    for factor in factors:
        writer.writerow([factor.id] + [repr(value) for value in factor.values.tolist()])


def parse_factor_rows(lines: Iterator[str], path: str = None, first_line: int = 1) -> tuple:
    """Parses a header line and factor rows.

    Args:
        lines: iterator over text lines, header first
        path (str): file name used in error messages
        first_line (int): line number of the header within the file

    Returns:
        tuple: (k, list of DenseFactor)

    Raises:
        TessParseError: bad header, ragged or non-numeric rows, invalid or duplicate ids
    """
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise TessParseError("missing header", path, first_line)

    k = len(header) - 1
    if k < 0 or header != factor_header(k):
        raise TessParseError(f"header must be id,f0,...,f{{k-1}}, got {','.join(header)}", path, first_line)

    factors = []
    seen = set()
    for offset, row in enumerate(reader, start=1):
        line = first_line + offset
        if not row:
            continue
        if len(row) != k + 1:
            raise TessParseError(f"expected {k + 1} fields, got {len(row)}", path, line)
        try:
            id = int(row[0])
            values = [float(value) for value in row[1:]]
        except ValueError as ex:
            raise TessParseError(f"non-numeric field: {ex}", path, line)
        if id in seen:
            raise TessParseError(f"duplicate id {id}", path, line)
        try:
            factors.append(DenseFactor(id, values))
        except TessDomainError as ex:
            raise TessParseError(str(ex), path, line)
        seen.add(id)

    return k, factors


class CSVFactorHandler:

    def __init__(self, filename: str, logger=None):
        """Handles one factor CSV file.

        Args:
            filename (str): path of the CSV file
            logger (logging, optional): The logger instance to be used. Defaults to get_logger.
        """

        if logger is None:
            logger = get_logger(__name__)
        self.logger = logger
        self.filename = filename
        self.k = 0
        self.factors = []

    def load_data(self) -> List[DenseFactor]:
        """Loads the factors from the file.

        Raises:
            TessParseError: the file is malformed
        """
        with open(self.filename, "r", encoding="utf-8", newline="") as infile:
            self.k, self.factors = parse_factor_rows(iter(infile), path=self.filename)
        self.logger.debug(f"Loaded {len(self.factors)} factors (k={self.k}) from {self.filename}")
        return self.factors

    def save_data(self, factors: List[DenseFactor]) -> None:
        """Writes the factors to the file, keeping their order."""
        ks = {factor.k for factor in factors}
        if len(ks) > 1:
            raise TessDomainError(f"factors of different dimensions: {sorted(ks)}")
        self.k = ks.pop() if ks else 0
        self.factors = list(factors)
        with open(self.filename, "w", encoding="utf-8", newline="") as outfile:
            write_factor_rows(outfile, self.factors, self.k)
        self.logger.debug(f"Saved {len(self.factors)} factors to {self.filename}")
