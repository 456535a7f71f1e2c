"""Collects one pass/fail line per acceptance criterion for the run summary."""

LINES: dict[tuple[int, str], str] = {}


def report(number: int, part: str, ok: bool, detail: str) -> None:
    label = f"{number}{part}"
    line = f"criterion {label:<3} {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[(number, part)] = line
    print(line)
