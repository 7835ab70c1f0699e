"""Terminal summary for the acceptance gate.

Acceptance tests are named ``test_criterion_<N>_*``; after a run this
hook prints one PASS/FAIL line per criterion number, aggregated over
parametrized cases (any failing case marks the criterion FAIL).
"""

import re

_CRITERION = re.compile(r"test_acceptance\.py.*::test_criterion_(\d+)")

# precedence when a criterion is split over several test cases
_RANK = {"FAIL": 3, "PASS": 2, "SKIP": 1}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, str] = {}
    for status, label in (
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("passed", "PASS"),
        ("skipped", "SKIP"),
    ):
        for report in terminalreporter.stats.get(status, ()):
            match = _CRITERION.search(getattr(report, "nodeid", ""))
            if match is None:
                continue
            n = int(match.group(1))
            best = outcomes.get(n)
            if best is None or _RANK[label] > _RANK[best]:
                outcomes[n] = label
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        terminalreporter.write_line(f"criterion {n}: {outcomes[n]}")
