from collections import OrderedDict

# criterion -> list of (case, passed, detail), filled by test_acceptance
ACCEPTANCE = OrderedDict()


def record(criterion, case, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((case, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c.split()[1])):
        cases = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in cases)
        bad = [f"{c}: {d}" for c, p, d in cases if not p]
        if ok:
            tr.write_line(f"{crit}: PASS ({len(cases)} case{'s' if len(cases) > 1 else ''})")
        else:
            tr.write_line(f"{crit}: FAIL ({len(bad)}/{len(cases)} cases) " + "; ".join(bad))
