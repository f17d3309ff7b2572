from typing import Any, Optional


def to_int(v: Any) -> Optional[int]:
    try:
        float_value = float(v)
        int_value = int(float_value)
        if int_value != float_value:
            return None
        return int_value
    except Exception:
        return None


def to_float(v: Any) -> Optional[float]:
    try:
        float_value = float(v)
        return float_value
    except Exception:
        return None


def to_complex(v: Any) -> Optional[complex]:
    """Parses complex literals such as ``0.5+0.5j``; ``i`` works as ``j``."""
    try:
        if isinstance(v, str):
            v = v.strip().replace(" ", "").replace("i", "j")
        complex_value = complex(v)
        return complex_value
    except Exception:
        return None
