"""Counter-based randomness: every draw is a pure function of its coordinates.

Lazily materialised state (RSI tables, nested spines) must not depend on the
order in which the simulator touches it, so draws are keyed by
``(seed, stream, *coordinates)`` instead of coming from a shared generator.
"""

_MASK = (1 << 64) - 1


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix(*parts: int) -> int:
    h = 0x243F6A8885A308D3
    for p in parts:
        h = _splitmix(h ^ (p & _MASK))
    return h


def draw_index(n: int, *parts: int) -> int:
    """Uniform integer in ``[0, n)`` keyed by ``parts``."""
    if n <= 0:
        raise ValueError("empty range")
    # 64-bit hash against n <= 2**40 keeps the modulo bias below 2**-24
    return mix(*parts) % n


# stream ids, kept distinct so independent draws never collide
RSI = 1
NESTED_SPINE = 2
RESAMPLE = 3
