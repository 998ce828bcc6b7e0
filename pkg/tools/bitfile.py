import json
import logging
import os
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from core.errors import DomainError, ParseError


logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".json"


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def _write_sidecar(path: Path, metadata: Dict) -> Path:
    side = sidecar_path(path)
    side.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    return side


def read_sidecar(path: Union[str, Path]) -> Dict:
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"No sidecar found at {side}")
    try:
        return json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed sidecar {side}: {exc.msg}", exc.lineno) from None


def write_bits(path: Union[str, Path], bits: np.ndarray, metadata: Dict = None) -> Path:
    """
    Save bits as raw packed bytes (MSB-first) plus a JSON sidecar.

    The sidecar records bit_length and whatever extractor metadata is passed
    (n_in, m_out, seed digest, block count). The packed file is what external
    test batteries read.

    Args:
        path: Output file
        bits: 0/1 array
        metadata: Extra sidecar fields

    Returns:
        Path of the bit file
    """
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    bits = np.asarray(bits, dtype=np.uint8)
    path.write_bytes(np.packbits(bits).tobytes())
    _write_sidecar(path, {**(metadata or {}), "bit_length": int(bits.size), "format": "packed-msb-first"})
    logger.info("wrote %d bits to %s", bits.size, path)
    return path


def read_bits(path: Union[str, Path]) -> Tuple[np.ndarray, Dict]:
    """Load a packed bit file and its sidecar."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No bit file found at {path}")
    metadata = read_sidecar(path)
    data = path.read_bytes()
    length = int(metadata.get("bit_length", len(data) * 8))
    if length > len(data) * 8:
        raise DomainError(f"sidecar declares {length} bits but {path} holds {len(data) * 8}")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=length), metadata


def write_float_stream(path: Union[str, Path], samples: np.ndarray, sample_rate: float,
                       lo_power: float, seed: int) -> Path:
    """Raw little-endian float32 samples plus a sidecar (sample_rate, lo_power, seed)."""
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    np.asarray(samples, dtype="<f4").tofile(path)
    _write_sidecar(path, {"sample_rate": sample_rate, "lo_power": lo_power, "seed": seed,
                          "n_samples": int(np.size(samples)), "dtype": "float32-le"})
    return path


def read_float_stream(path: Union[str, Path]) -> Tuple[np.ndarray, Dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No stream file found at {path}")
    return np.fromfile(path, dtype="<f4").astype(float), read_sidecar(path)


def write_codes(path: Union[str, Path], codes: np.ndarray, bits: int) -> Path:
    """ADC codes, one byte per code (bits <= 8)."""
    if bits > 8:
        raise DomainError("code files hold one code per byte; bits must be <= 8")
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    np.asarray(codes, dtype=np.uint8).tofile(path)
    _write_sidecar(path, {"adc_bits": bits, "n_codes": int(np.size(codes))})
    return path
