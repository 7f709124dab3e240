import shutil
import subprocess
import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / "src" / "stub_device.c"


@pytest.fixture(scope="session")
def stub_path(tmp_path_factory):
    """Compile the stub (with the delay hook) once for the whole session."""
    cc = shutil.which("cc") or shutil.which("gcc") or shutil.which("clang")
    if cc is None:
        pytest.skip("no C compiler on PATH")
    out = tmp_path_factory.mktemp("stub") / "libstubdevice.so"
    cmd = [cc, "-O2", "-std=c11", "-Wall", "-Wextra", "-fPIC", "-shared",
           "-ffp-contract=off", "-DSTUB_TEST_HOOKS", "-o", str(out),
           str(SRC)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        pytest.skip(f"stub build failed: {proc.stderr.strip()[:200]}")
    return str(out)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_stub_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria (compiled stub)")
    for num in sorted(results):
        verdict, detail = results[num]
        line = f"criterion {num:2d}: {verdict}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
