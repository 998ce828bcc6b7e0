"""
Touchstone v1 two-port files.

The line scanner here only checks structure so that every error names its
line; numeric conversion and writing are done by scikit-rf.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import skrf as rf
from skrf.io.touchstone import Touchstone

from core.errors import DomainError, ParseError
from core.rf_network import FrequencySweep, TwoPortNetwork


logger = logging.getLogger(__name__)

FREQUENCY_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
DATA_FORMATS = ("MA", "DB", "RI")

S_COLUMNS = 9
NOISE_COLUMNS = 5


@dataclass(frozen=True)
class TouchstoneOptions:
    """Contents of the `# <unit> S <format> R <z>` option line."""
    unit: str = "GHZ"
    parameter: str = "S"
    data_format: str = "MA"
    z_ref: float = 50.0

    def canonical_line(self) -> str:
        """Option line in the positional order scikit-rf expects."""
        return f"# {self.unit.lower()} s {self.data_format.lower()} r {self.z_ref:.17g}"


def _parse_option_line(line: str, line_number: int) -> TouchstoneOptions:
    tokens = line[1:].split("!")[0].upper().split()
    unit, parameter, data_format, z_ref = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token in FREQUENCY_UNITS:
            unit = token
        elif token in DATA_FORMATS:
            data_format = token
        elif token in ("S", "Y", "Z", "H", "G"):
            parameter = token
        elif token == "R":
            if i + 1 >= len(tokens):
                raise ParseError("option line ends after 'R'", line_number)
            try:
                z_ref = float(tokens[i + 1])
            except ValueError:
                raise ParseError(f"bad reference impedance {tokens[i + 1]!r}", line_number) from None
            i += 1
        else:
            raise ParseError(f"unknown option {token!r}", line_number)
        i += 1

    if parameter != "S":
        raise ParseError(f"only S-parameter files are supported, got {parameter}", line_number)
    if not z_ref > 0:
        raise ParseError("reference impedance must be positive", line_number)
    return TouchstoneOptions(unit, parameter, data_format, z_ref)


def _numbers(fields: List[str], line_number: int) -> List[float]:
    try:
        return [float(v) for v in fields]
    except ValueError:
        raise ParseError("non-numeric value in data row", line_number) from None


def parse_touchstone(text: Union[bytes, str]) -> TwoPortNetwork:
    """
    Parse a Touchstone v1 two-port file.

    A noise-parameter block (five-column rows whose frequency restarts
    below the last S-parameter row) ends the S-data; it is skipped with a
    warning.

    Args:
        text: File contents (bytes or str)

    Returns:
        TwoPortNetwork with frequencies in Hz

    Raises:
        ParseError: On a missing option line, data before it, a wrong column
            count, non-increasing frequencies or a version 2 file
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")

    options = None
    data_lines: List[str] = []
    first_row_line = 0
    last_f = None
    noise_rows = 0
    last_noise_f = None

    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("!"):
            continue
        if line.startswith("["):
            raise ParseError("Touchstone v2 keywords are not supported (v1 files only)", line_number)
        if line.startswith("#"):
            if options is None:
                options = _parse_option_line(line, line_number)
            else:
                logger.warning("ignoring repeated option line %d", line_number)
            continue
        if options is None:
            raise ParseError("data found before the option line", line_number)

        fields = line.split("!")[0].split()
        values = _numbers(fields, line_number)

        # Step 1: rows inside a noise block
        if noise_rows:
            if len(values) != NOISE_COLUMNS:
                raise ParseError(
                    f"expected {NOISE_COLUMNS} columns in the noise-parameter block, got {len(values)}",
                    line_number)
            if values[0] <= last_noise_f:
                raise ParseError("noise-parameter frequencies must be strictly increasing", line_number)
            noise_rows += 1
            last_noise_f = values[0]
            continue

        # Step 2: a five-column frequency restart opens the noise block
        if last_f is not None and len(values) == NOISE_COLUMNS and values[0] <= last_f:
            noise_rows, last_noise_f = 1, values[0]
            continue

        # Step 3: S-parameter rows
        if len(values) != S_COLUMNS:
            raise ParseError(f"expected {S_COLUMNS} columns for a two-port row, got {len(values)}", line_number)
        if last_f is not None and values[0] <= last_f:
            raise ParseError("frequencies must be strictly increasing", line_number)
        if last_f is None:
            first_row_line = line_number
        last_f = values[0]
        data_lines.append(" ".join(fields))

    if options is None:
        raise ParseError("missing option line")
    if not data_lines:
        raise ParseError("file contains no data rows")
    if noise_rows:
        logger.warning("skipped %d noise-parameter rows after the S-parameter data", noise_rows)

    buffer = io.StringIO("\n".join([options.canonical_line(), *data_lines]) + "\n")
    buffer.name = "network.s2p"
    f, s = Touchstone(buffer).get_sparameter_arrays()
    try:
        sweep = FrequencySweep(f)
    except DomainError as exc:
        raise ParseError(str(exc), first_row_line) from None
    return TwoPortNetwork(sweep, s, options.z_ref)


def read_touchstone(path: Union[str, Path]) -> TwoPortNetwork:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No Touchstone file found at {path}")
    return parse_touchstone(path.read_bytes())


def write_touchstone(network: TwoPortNetwork, data_format: str = "RI", unit: str = "GHZ") -> str:
    """
    Serialize a network as Touchstone v1 text.

    Args:
        network: Network to write
        data_format: MA, DB or RI
        unit: Hz, kHz, MHz or GHz

    Returns:
        File contents
    """
    data_format, unit = data_format.upper(), unit.upper()
    if data_format not in DATA_FORMATS or unit not in FREQUENCY_UNITS:
        raise DomainError(f"unsupported Touchstone format {unit} {data_format}")

    frequency = rf.Frequency.from_f(network.frequencies / FREQUENCY_UNITS[unit], unit=unit.lower())
    ntwk = rf.Network(frequency=frequency, s=network.s, z0=network.z_ref, name="network")
    return ntwk.write_touchstone(filename="network", return_string=True, form=data_format.lower())


def save_touchstone(network: TwoPortNetwork, path: Union[str, Path], data_format: str = "RI") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_touchstone(network, data_format))
    return path
