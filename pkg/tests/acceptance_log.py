"""Shared record of acceptance outcomes, printed in the pytest summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return line
