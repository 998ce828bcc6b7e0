from tools.touchstone import read_touchstone, save_touchstone
from tools.bitfile import read_bits, write_bits

__all__ = ["read_touchstone", "save_touchstone", "read_bits", "write_bits"]
