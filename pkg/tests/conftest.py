import os

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail, gating)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split("-")[0]), str(k))):
        ok, detail, gating = ACCEPTANCE[num]
        tag = "PASS" if ok else "FAIL"
        note = "" if gating else " (non-gating)"
        tr.write_line(f"criterion {num}: {tag}{note} - {detail}")
