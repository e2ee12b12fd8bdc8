"""Shared pytest plumbing: the acceptance-criteria summary block."""

ACCEPTANCE: list[str] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def record_acceptance_skip(name: str, detail: str) -> None:
    ACCEPTANCE.append(f"SKIP  {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
