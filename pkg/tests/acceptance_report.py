"""Collects one summary line per acceptance criterion for the terminal report."""

LINES = []


def record(number: int, passed: bool, detail: str) -> bool:
    LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    print(LINES[-1])
    return passed
