"""
Binary Toeplitz-matrix randomness extraction over GF(2).

The matrix is constant along diagonals and is defined by m_out + n_in - 1 seed
bits: T[i][j] = seed[i - j + n_in - 1]. Rows are packed into 64-bit words so a
block is extracted with AND, popcount and a parity bit per output. Bits are
MSB-first within every byte.
"""
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from config.settings import settings
from core.errors import DomainError, SizingError


logger = logging.getLogger(__name__)

WORD_BYTES = 8


class SizingMode(str, Enum):
    """Base of the logarithm in the security term of the output length."""
    PAPER_LITERAL_LOG10 = "paper_literal_log10"
    STANDARD_LOG2 = "standard_log2"

    @classmethod
    def from_calc_mode(cls, mode) -> "SizingMode":
        value = getattr(mode, "value", mode)
        return cls.PAPER_LITERAL_LOG10 if value == "paper_literal" else cls.STANDARD_LOG2


@dataclass(frozen=True)
class ExtractorConfig:
    n_in: int
    m_out: int
    epsilon_hash: float = settings.EPSILON_HASH
    h_min_per_bit: float = 1.0

    def validate(self) -> bool:
        if not 0 < self.m_out <= self.n_in:
            raise DomainError(f"need 0 < m_out <= n_in, got m_out={self.m_out}, n_in={self.n_in}")
        if not 0 < self.h_min_per_bit <= 1:
            raise DomainError("h_min_per_bit must lie in (0, 1]")
        if not 0 < self.epsilon_hash < 1:
            raise DomainError("epsilon_hash must lie in (0, 1)")
        return True

    @property
    def seed_length(self) -> int:
        return self.m_out + self.n_in - 1


@dataclass(frozen=True)
class BitBlock:
    """Packed bits (MSB-first) with an explicit bit length."""
    packed: bytes
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= len(self.packed) * 8 or len(self.packed) != -(-self.length // 8):
            raise DomainError(f"{len(self.packed)} packed bytes cannot hold exactly {self.length} bits")

    @classmethod
    def from_bits(cls, bits) -> "BitBlock":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(np.packbits(bits).tobytes(), int(bits.size))

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8), count=self.length)

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class ToeplitzSeed:
    bits: np.ndarray
    rng_seed_used: Optional[int] = None  # None for an externally supplied seed

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise DomainError("seed must be a one-dimensional 0/1 sequence")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_int(cls, rng_seed: int, length: int) -> "ToeplitzSeed":
        """Expand a 64-bit integer with the counter-based Philox generator."""
        rng = np.random.Generator(np.random.Philox(rng_seed))
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8), rng_seed)

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "ToeplitzSeed":
        """External seed: the first `length` bits of data, MSB-first."""
        if len(data) * 8 < length:
            raise DomainError(f"seed data holds {len(data) * 8} bits, {length} needed")
        return cls(np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=length))

    def __len__(self) -> int:
        return self.bits.size

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.bits.size.to_bytes(8, "big"))
        h.update(np.packbits(self.bits).tobytes())
        return h.hexdigest()


def size_output(n_in: int, h_min_per_bit: float, epsilon_hash: float,
                mode=SizingMode.STANDARD_LOG2) -> int:
    """
    Output block length allowed by the leftover hash lemma.

    Args:
        n_in: Input bits per block
        h_min_per_bit: Min-entropy per input bit
        epsilon_hash: Security parameter
        mode: standard_log2 or paper_literal_log10 (base of the security term)

    Returns:
        floor(n_in * h_min_per_bit - 2 * log_b(1 / epsilon_hash))

    Raises:
        SizingError: If the result is not positive
    """
    mode = SizingMode(mode)
    if n_in <= 0:
        raise DomainError("n_in must be positive")
    if not 0 < h_min_per_bit <= 1:
        raise DomainError("h_min_per_bit must lie in (0, 1]")
    if not 0 < epsilon_hash <= 1:
        raise DomainError("epsilon_hash must lie in (0, 1]")

    log = math.log10 if mode is SizingMode.PAPER_LITERAL_LOG10 else math.log2
    m_out = math.floor(n_in * h_min_per_bit - 2 * log(1 / epsilon_hash))
    if m_out <= 0:
        raise SizingError(
            f"no output bits: n_in={n_in}, h_min_per_bit={h_min_per_bit}, epsilon={epsilon_hash} ({mode.value})")
    return min(m_out, n_in)


def efficiency(cfg: ExtractorConfig) -> float:
    return cfg.m_out / cfg.n_in


def effective_rate(channels: int, sample_rate: float, adc_bits: int, m_out: int, n_in: int) -> float:
    """Aggregate extracted bit rate (bits/s) over parallel channels."""
    return channels * sample_rate * adc_bits * m_out / n_in


def _pack_words(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into uint64 words (zero padded)."""
    packed = np.packbits(bits, axis=-1)
    pad = (-packed.shape[-1]) % WORD_BYTES
    if pad:
        widths = [(0, 0)] * (packed.ndim - 1) + [(0, pad)]
        packed = np.pad(packed, widths)
    return np.ascontiguousarray(packed).view(np.uint64)


class ToeplitzExtractor:
    """
    Immutable Toeplitz hash for one (seed, config) pair.

    Instances hold only read-only arrays and can be shared between threads.
    """

    def __init__(self, seed: ToeplitzSeed, cfg: ExtractorConfig):
        """
        Build the extractor.

        Args:
            seed: m_out + n_in - 1 seed bits
            cfg: Extractor configuration

        Raises:
            DomainError: If the seed length does not match the configuration
        """
        cfg.validate()
        if len(seed) != cfg.seed_length:
            raise DomainError(f"seed has {len(seed)} bits, configuration needs {cfg.seed_length}")
        self.seed = seed
        self.cfg = cfg

        # row i is seed[i : i + n_in] reversed
        windows = np.lib.stride_tricks.sliding_window_view(seed.bits, cfg.n_in)
        self._rows = np.ascontiguousarray(windows[: cfg.m_out, ::-1])
        self._words = _pack_words(self._rows)
        self._rows.setflags(write=False)
        self._words.setflags(write=False)

    @property
    def matrix(self) -> np.ndarray:
        """The m_out x n_in 0/1 matrix."""
        return self._rows

    def dense_matrix(self) -> np.ndarray:
        """Matrix built element by element from the index formula."""
        m, n = self.cfg.m_out, self.cfg.n_in
        t = np.zeros((m, n), dtype=np.uint8)
        for i in range(m):
            for j in range(n):
                t[i, j] = self.seed.bits[i - j + n - 1]
        return t

    def _as_bits(self, x: Union[BitBlock, Sequence[int], np.ndarray]) -> np.ndarray:
        bits = x.bits if isinstance(x, BitBlock) else np.asarray(x, dtype=np.uint8)
        if bits.shape[-1] != self.cfg.n_in:
            raise DomainError(f"block has {bits.shape[-1]} bits, extractor expects {self.cfg.n_in}")
        return bits

    def extract_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """
        Extract a batch of blocks.

        Args:
            blocks: (k, n_in) array of 0/1 values

        Returns:
            (k, m_out) array of 0/1 values
        """
        blocks = self._as_bits(blocks)
        if blocks.ndim != 2:
            raise DomainError("expected a two-dimensional batch of blocks")
        x_words = _pack_words(blocks)
        ones = np.bitwise_count(x_words[:, None, :] & self._words[None, :, :])
        return (ones.sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)

    def extract_block(self, x: Union[BitBlock, Sequence[int], np.ndarray]) -> BitBlock:
        bits = self._as_bits(x)
        if bits.ndim != 1:
            raise DomainError("expected a single block")
        return BitBlock.from_bits(self.extract_blocks(bits[None, :])[0])

    def extract_block_naive(self, x: Union[BitBlock, Sequence[int], np.ndarray]) -> np.ndarray:
        """Double-loop GF(2) product, kept as a reference."""
        bits = self._as_bits(x)
        n = self.cfg.n_in
        y = np.zeros(self.cfg.m_out, dtype=np.uint8)
        for i in range(self.cfg.m_out):
            acc = 0
            for j in range(n):
                acc ^= int(self.seed.bits[i - j + n - 1]) & int(bits[j])
            y[i] = acc
        return y


def build_matrix(seed: ToeplitzSeed, cfg: ExtractorConfig) -> ToeplitzExtractor:
    return ToeplitzExtractor(seed, cfg)


def codes_to_bits(codes: np.ndarray, adc_bits: int) -> np.ndarray:
    """Serialize ADC codes MSB-first, adc_bits per code."""
    codes = np.asarray(codes, dtype=np.uint16)
    shifts = np.arange(adc_bits - 1, -1, -1, dtype=np.uint16)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def derive_channel_seeds(seed: ToeplitzSeed, channels: int) -> List[ToeplitzSeed]:
    """
    One seed per channel.

    A single channel uses the seed as given. Otherwise channel c gets a Philox
    expansion of a key derived from (base seed, c); the base is the integer
    seed, or the seed digest for an external seed.
    """
    if channels < 1:
        raise DomainError("channels must be at least 1")
    if channels == 1:
        return [seed]
    base = seed.rng_seed_used if seed.rng_seed_used is not None else int(seed.digest[:16], 16)
    seeds = []
    for c in range(channels):
        key = int(np.random.SeedSequence([base, c]).generate_state(1, np.uint64)[0])
        seeds.append(ToeplitzSeed.from_int(key, len(seed)))
    return seeds


@dataclass
class ExtractionResult:
    outputs: List[np.ndarray]  # per-channel output bits, in block order
    channels: int
    n_in: int
    m_out: int
    blocks: int = 0
    discarded_bits: int = 0
    seed_digests: List[str] = field(default_factory=list)

    @property
    def output_bits(self) -> int:
        return sum(o.size for o in self.outputs)

    def merged_bits(self) -> np.ndarray:
        """All output blocks in global block-index order."""
        if self.blocks == 0:
            return np.zeros(0, dtype=np.uint8)
        per_channel = [o.reshape(-1, self.m_out) for o in self.outputs]
        ordered = [per_channel[b % self.channels][b // self.channels] for b in range(self.blocks)]
        return np.concatenate(ordered)

    def to_dict(self) -> Dict:
        return {
            "channels": self.channels,
            "n_in": self.n_in,
            "m_out": self.m_out,
            "blocks": self.blocks,
            "discarded_bits": self.discarded_bits,
            "output_bits": self.output_bits,
            "seed_digests": self.seed_digests,
        }


def extract_stream(
    codes: np.ndarray,
    adc_bits: int,
    cfg: ExtractorConfig,
    seed: ToeplitzSeed,
    channels: int = 1,
    workers: int = None,
    batch_blocks: int = None
) -> ExtractionResult:
    """
    Extract a code stream block by block over one or more channels.

    Blocks are dealt to channels round-robin; each channel has its own seed.
    The trailing partial block is discarded, never padded.

    Args:
        codes: ADC codes
        adc_bits: Bits per code
        cfg: Extractor configuration
        seed: Base seed
        channels: Number of independent channels
        workers: Worker threads (default from settings)
        batch_blocks: Blocks per batch on the fast path

    Returns:
        ExtractionResult with per-channel outputs
    """
    if channels < 1:
        raise DomainError("channels must be at least 1")
    workers = workers or settings.WORKERS
    batch_blocks = batch_blocks or settings.EXTRACT_BATCH_BLOCKS

    bits = codes_to_bits(codes, adc_bits)
    n_blocks = bits.size // cfg.n_in
    discarded = bits.size - n_blocks * cfg.n_in
    channel_seeds = derive_channel_seeds(seed, channels)
    extractors = [ToeplitzExtractor(s, cfg) for s in channel_seeds]
    digests = [s.digest for s in channel_seeds]

    if n_blocks == 0:
        logger.warning("stream of %d bits is shorter than one %d-bit block; no output", bits.size, cfg.n_in)
        empty = [np.zeros(0, dtype=np.uint8) for _ in range(channels)]
        return ExtractionResult(empty, channels, cfg.n_in, cfg.m_out, 0, discarded, digests)
    if discarded:
        logger.warning("discarding %d trailing bits (partial block)", discarded)

    blocks = bits[: n_blocks * cfg.n_in].reshape(n_blocks, cfg.n_in)

    # Step 1: split each channel's blocks into batches
    tasks = []
    for c in range(channels):
        channel_blocks = blocks[c::channels]
        for start in range(0, channel_blocks.shape[0], batch_blocks):
            tasks.append((c, start, channel_blocks[start:start + batch_blocks]))

    # Step 2: extract batches, possibly in parallel
    def run(task):
        c, _, batch = task
        return extractors[c].extract_blocks(batch)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]

    # Step 3: reassemble per channel by block index
    outputs = []
    for c in range(channels):
        parts = [(start, out) for (tc, start, _), out in zip(tasks, results) if tc == c]
        parts.sort(key=lambda p: p[0])
        outputs.append(np.concatenate([out.ravel() for _, out in parts]) if parts
                       else np.zeros(0, dtype=np.uint8))

    logger.info("extracted %d blocks over %d channel(s)", n_blocks, channels)
    return ExtractionResult(outputs, channels, cfg.n_in, cfg.m_out, n_blocks, discarded, digests)


def throughput_bench(cfg: ExtractorConfig, n_blocks: int, workers: Sequence[int] = (1,),
                     rng_seed: int = 0) -> Dict:
    """
    Wall-clock extraction throughput on synthetic input.

    Report only: timings depend on the machine.

    Returns:
        Dictionary with input/output bit counts, per-worker-count rates and
        the scaling factor of each worker count against one worker
    """
    seed = ToeplitzSeed.from_int(rng_seed, cfg.seed_length)
    rng = np.random.default_rng(rng_seed)
    # one-bit codes give exactly n_blocks * n_in input bits
    codes = rng.integers(0, 2, size=n_blocks * cfg.n_in, dtype=np.uint8)

    runs = []
    for w in workers:
        start = time.perf_counter()
        result = extract_stream(codes, 1, cfg, seed, channels=max(1, w), workers=w)
        elapsed = time.perf_counter() - start
        rate = result.output_bits / elapsed if elapsed > 0 and result.output_bits else 0.0
        runs.append({"workers": w, "blocks": result.blocks, "output_bits": result.output_bits,
                     "seconds": elapsed, "bits_per_second": rate})

    base = runs[0]["bits_per_second"] if runs else 0.0
    for r in runs:
        r["scaling"] = r["bits_per_second"] / base if base > 0 else 0.0
    return {"n_in": cfg.n_in, "m_out": cfg.m_out, "input_bits": n_blocks * cfg.n_in, "runs": runs}
