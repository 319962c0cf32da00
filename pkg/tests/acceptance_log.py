"""Per-criterion outcomes collected by the acceptance tests and printed at session end."""

RESULTS: dict[int, tuple[bool, str]] = {}


def record(num: int, ok: bool, detail: str) -> bool:
    RESULTS[num] = (bool(ok), detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok
