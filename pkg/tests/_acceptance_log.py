"""One result line per acceptance criterion, shared by pytest and the standalone runner."""
LINES: dict = {}


def record(number: int, name: str, ok: bool, detail: str, seconds: float) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {name}: {detail} ({seconds:.1f} s)"
    LINES[number] = line
    print(line, flush=True)
    return line
