import math


def fmt(x) -> str:
    """Shortest round-trip text for a number; integral floats drop the ``.0``."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isfinite(x) and x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)
