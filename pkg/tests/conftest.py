from __future__ import annotations

import pytest

from oulagraph import ingest, synthetic
from oulagraph.grades import build_snapshots


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    return synthetic.write(tmp_path_factory.mktemp("oulad"), n_students=200, seed=3)


@pytest.fixture(scope="session")
def tables(synthetic_dir):
    return ingest.load_oula(synthetic_dir)


@pytest.fixture(scope="session")
def canonical(tables):
    return ingest.preprocess(*tables, tables.registrations)


@pytest.fixture(scope="session")
def snapshots(tables, canonical):
    return build_snapshots(canonical, tables.assessments, tables.submissions)


# one PASS/FAIL/SKIP/PARTIAL line per acceptance criterion

_acceptance: dict[str, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and report.passed:
        return
    if "acceptance" not in report.keywords:
        return
    name = report.nodeid.split("::")[-1]
    crit = name.split("_")[1] if name.startswith("test_ac") else name
    if report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        _acceptance.setdefault(crit, []).append(("SKIP", reason.removeprefix("Skipped: ")))
    else:
        _acceptance.setdefault(crit, []).append(("PASS" if report.passed else "FAIL", name))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_acceptance, key=lambda c: int(c[2:]) if c[2:].isdigit() else 99):
        outs = [o for o, _ in _acceptance[crit]]
        if "FAIL" in outs:
            verdict = "FAIL"
        elif all(o == "PASS" for o in outs):
            verdict = "PASS"
        elif all(o == "SKIP" for o in outs):
            verdict = "SKIP"
        else:
            verdict = "PARTIAL"
        detail = "; ".join(f"{o.lower()}: {why}" for o, why in _acceptance[crit] if o != "PASS")
        terminalreporter.write_line(f"{crit.upper()} {verdict}" + (f" ({detail})" if detail else ""))
